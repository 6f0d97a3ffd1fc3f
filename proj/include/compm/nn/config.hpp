#pragma once

#include <cstddef>
#include <string>

#include "json.hpp"

namespace compm::nn {

/// Shape of one transformer encoder (CoM uses width h_c, PM width h_k).
struct EncoderConfig {
  std::string backbone = "tiny";  // two encoders share a backbone iff their configs are equal
  std::size_t vocab_size = 0;
  std::size_t hidden_dim = 16;
  std::size_t num_layers = 1;
  std::size_t num_heads = 2;
  std::size_t ffn_dim = 32;
  std::size_t max_positions = 128;
  double dropout_rate = 0.1;

  /// Throws ConfigError on zero extents, indivisible heads, or a bad dropout rate.
  void validate() const;
  std::size_t head_dim() const { return hidden_dim / num_heads; }

  bool operator==(const EncoderConfig&) const = default;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

struct GruConfig {
  std::size_t input_dim = 16;
  std::size_t hidden_dim = 16;
  std::size_t num_layers = 2;
  double dropout_rate = 0.3;  // between stacked layers, training only

  void validate() const;
  bool operator==(const GruConfig&) const = default;
};

void to_json(nlohmann::json& j, const GruConfig& c);
void from_json(const nlohmann::json& j, GruConfig& c);

}  // namespace compm::nn

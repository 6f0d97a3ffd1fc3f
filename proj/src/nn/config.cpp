#include "compm/nn/config.hpp"

#include "compm/errors.hpp"

namespace compm::nn {

void EncoderConfig::validate() const {
  if (vocab_size == 0) throw ConfigError("encoder '" + backbone + "': vocab_size must be positive");
  if (hidden_dim == 0 || num_layers == 0 || num_heads == 0 || ffn_dim == 0 || max_positions < 2) {
    throw ConfigError("encoder '" + backbone + "': extents must be positive (max_positions >= 2)");
  }
  if (hidden_dim % num_heads != 0) {
    throw ConfigError("encoder '" + backbone + "': hidden_dim " + std::to_string(hidden_dim) +
                      " is not divisible by num_heads " + std::to_string(num_heads));
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("encoder '" + backbone + "': dropout_rate must lie in [0, 1)");
  }
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"backbone", c.backbone},       {"vocab_size", c.vocab_size},
                     {"hidden_dim", c.hidden_dim},   {"num_layers", c.num_layers},
                     {"num_heads", c.num_heads},     {"ffn_dim", c.ffn_dim},
                     {"max_positions", c.max_positions}, {"dropout_rate", c.dropout_rate}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  EncoderConfig d;
  c.backbone = j.value("backbone", d.backbone);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.num_layers = j.value("num_layers", d.num_layers);
  c.num_heads = j.value("num_heads", d.num_heads);
  c.ffn_dim = j.value("ffn_dim", d.ffn_dim);
  c.max_positions = j.value("max_positions", d.max_positions);
  c.dropout_rate = j.value("dropout_rate", d.dropout_rate);
}

void GruConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || num_layers == 0) throw ConfigError("GRU extents must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("GRU dropout_rate must lie in [0, 1)");
}

void to_json(nlohmann::json& j, const GruConfig& c) {
  j = nlohmann::json{{"input_dim", c.input_dim},
                     {"hidden_dim", c.hidden_dim},
                     {"num_layers", c.num_layers},
                     {"dropout_rate", c.dropout_rate}};
}

void from_json(const nlohmann::json& j, GruConfig& c) {
  GruConfig d;
  c.input_dim = j.value("input_dim", d.input_dim);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.num_layers = j.value("num_layers", d.num_layers);
  c.dropout_rate = j.value("dropout_rate", d.dropout_rate);
}

}  // namespace compm::nn

#pragma once

#include <string>
#include <string_view>

#include "compm/nn/config.hpp"
#include "json.hpp"

namespace compm::model {

/// Ablation rows: context only, memory-encoder only, joint fine-tuning, frozen
/// pretrained memory encoder, and memory encoder trained from scratch.
enum class VariantMode { CoMOnly, PMOnly, CoMPM, CoMPMFrozen, CoMPMScratch };

/// Canonical names: CoM_only, PM_only, CoMPM, CoMPM_frozen, CoMPM_scratch.
/// Parsing also accepts CoM, PM, CoMPM(f), CoMPM(s).
std::string to_string(VariantMode mode);
VariantMode parse_variant(std::string_view name);

bool uses_context_encoder(VariantMode mode);
bool uses_memory_encoder(VariantMode mode);
/// Memory tracking and fusion (every CoMPM row).
bool uses_tracking(VariantMode mode);
bool memory_encoder_trainable(VariantMode mode);
/// Whether a pretrained memory-encoder checkpoint is loaded at initialization.
bool loads_pretrained_memory(VariantMode mode);

struct ModelConfig {
  nn::EncoderConfig context;  // CoM, width h_c
  nn::EncoderConfig memory;   // PM, width h_k
  std::size_t num_classes = 7;
  VariantMode variant = VariantMode::CoMPM;
  std::size_t gru_layers = 2;
  double gru_dropout = 0.3;

  /// W_p exists iff memory tracking is active and the two encoders differ in width or backbone.
  bool has_projection() const;
  /// Width of the head input: h_c, or h_k for PM_only.
  std::size_t head_input_dim() const;
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace compm::model

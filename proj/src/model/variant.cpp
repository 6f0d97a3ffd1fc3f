#include "compm/model/variant.hpp"

#include "compm/errors.hpp"

namespace compm::model {

std::string to_string(VariantMode mode) {
  switch (mode) {
    case VariantMode::CoMOnly: return "CoM_only";
    case VariantMode::PMOnly: return "PM_only";
    case VariantMode::CoMPM: return "CoMPM";
    case VariantMode::CoMPMFrozen: return "CoMPM_frozen";
    case VariantMode::CoMPMScratch: return "CoMPM_scratch";
  }
  return "CoMPM";
}

VariantMode parse_variant(std::string_view name) {
  if (name == "CoM_only" || name == "CoM") return VariantMode::CoMOnly;
  if (name == "PM_only" || name == "PM") return VariantMode::PMOnly;
  if (name == "CoMPM") return VariantMode::CoMPM;
  if (name == "CoMPM_frozen" || name == "CoMPM(f)") return VariantMode::CoMPMFrozen;
  if (name == "CoMPM_scratch" || name == "CoMPM(s)") return VariantMode::CoMPMScratch;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (CoM_only, PM_only, CoMPM, CoMPM_frozen, CoMPM_scratch)");
}

bool uses_context_encoder(VariantMode mode) { return mode != VariantMode::PMOnly; }
bool uses_memory_encoder(VariantMode mode) { return mode != VariantMode::CoMOnly; }
bool uses_tracking(VariantMode mode) {
  return mode == VariantMode::CoMPM || mode == VariantMode::CoMPMFrozen || mode == VariantMode::CoMPMScratch;
}
bool memory_encoder_trainable(VariantMode mode) { return uses_memory_encoder(mode) && mode != VariantMode::CoMPMFrozen; }
bool loads_pretrained_memory(VariantMode mode) {
  return mode == VariantMode::PMOnly || mode == VariantMode::CoMPM || mode == VariantMode::CoMPMFrozen;
}

bool ModelConfig::has_projection() const { return uses_tracking(variant) && !(context == memory); }

std::size_t ModelConfig::head_input_dim() const {
  return variant == VariantMode::PMOnly ? memory.hidden_dim : context.hidden_dim;
}

void ModelConfig::validate() const {
  if (num_classes < 2) throw ConfigError("a classifier needs at least two classes");
  if (uses_context_encoder(variant)) context.validate();
  if (uses_memory_encoder(variant)) memory.validate();
  if (uses_context_encoder(variant) && uses_memory_encoder(variant) && context.vocab_size != memory.vocab_size) {
    throw ConfigError("context and memory encoders must share one vocabulary");
  }
  if (gru_layers == 0) throw ConfigError("the memory tracker needs at least one GRU layer");
  if (gru_dropout < 0.0 || gru_dropout >= 1.0) throw ConfigError("gru_dropout must lie in [0, 1)");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"num_classes", c.num_classes},
          {"context_encoder", c.context},
          {"memory_encoder", c.memory},
          {"gru", {{"num_layers", c.gru_layers}, {"dropout_rate", c.gru_dropout}}}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.num_classes = j.at("num_classes").get<std::size_t>();
    if (j.contains("context_encoder")) c.context = j.at("context_encoder").get<nn::EncoderConfig>();
    if (j.contains("memory_encoder")) c.memory = j.at("memory_encoder").get<nn::EncoderConfig>();
    if (j.contains("gru")) {
      c.gru_layers = j.at("gru").value("num_layers", c.gru_layers);
      c.gru_dropout = j.at("gru").value("dropout_rate", c.gru_dropout);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
  return c;
}

}  // namespace compm::model

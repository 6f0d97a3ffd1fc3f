#include "compm/app/run_config.hpp"

#include <cstdlib>
#include <set>

#include "compm/errors.hpp"
#include "compm/util/atomic_file.hpp"

namespace compm::app {

namespace fs = std::filesystem;

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

nn::EncoderConfig encoder_from(const nlohmann::json& j, const std::string& where) {
  reject_unknown(j,
                 {"backbone", "vocab_size", "hidden_dim", "num_layers", "num_heads", "ffn_dim", "max_positions",
                  "dropout_rate"},
                 where);
  return j.get<nn::EncoderConfig>();
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p.string());
}

std::uint64_t parse_seed(const std::string& text, const std::string& source) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(source + " is not an unsigned integer: '" + text + "'");
  }
}

}  // namespace

data::LabelTaxonomy resolve_taxonomy(const std::string& name_or_path) {
  const auto names = data::LabelTaxonomy::builtin_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    return data::LabelTaxonomy::builtin(name_or_path);
  }
  if (fs::is_regular_file(name_or_path)) {
    try {
      return data::LabelTaxonomy::from_json(nlohmann::json::parse(read_file(name_or_path)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("taxonomy file " + name_or_path + ": " + e.what());
    }
  }
  std::string list;
  for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
  throw ConfigError("unknown taxonomy '" + name_or_path + "' (built-in: " + list + ", or a JSON file)");
}

RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base) {
  reject_unknown(j,
                 {"data", "taxonomy", "variant", "speaker_pool", "min_count", "model", "pretrained_checkpoint",
                  "init_context_from_pretrained", "train", "pretrain", "seed", "train_fraction", "runs",
                  "output_dir"},
                 "run config");
  RunConfig c;
  try {
    const auto& data = j.at("data");
    reject_unknown(data, {"train", "dev", "test", "pretrain"}, "data");
    c.train_path = resolve(base, data.at("train").get<std::string>());
    if (data.contains("dev")) c.dev_path = resolve(base, data.at("dev").get<std::string>());
    if (data.contains("test")) c.test_path = resolve(base, data.at("test").get<std::string>());
    if (data.contains("pretrain")) {
      for (const auto& p : data.at("pretrain")) c.pretrain_paths.push_back(resolve(base, p.get<std::string>()));
    }

    if (j.contains("taxonomy")) {
      const auto& t = j.at("taxonomy");
      if (t.is_string()) {
        const auto name = t.get<std::string>();
        const auto names = data::LabelTaxonomy::builtin_names();
        c.taxonomy = std::find(names.begin(), names.end(), name) != names.end()
                         ? data::LabelTaxonomy::builtin(name)
                         : resolve_taxonomy(resolve(base, name).string());
      } else {
        c.taxonomy = data::LabelTaxonomy::from_json(t);
      }
    }
    if (j.contains("variant")) c.variant = model::parse_variant(j.at("variant").get<std::string>());
    c.speaker_pool = j.value("speaker_pool", c.speaker_pool);
    c.min_count = j.value("min_count", c.min_count);

    if (j.contains("model")) {
      const auto& m = j.at("model");
      reject_unknown(m, {"context_encoder", "memory_encoder", "gru"}, "model");
      if (m.contains("context_encoder")) c.context = encoder_from(m.at("context_encoder"), "model.context_encoder");
      if (m.contains("memory_encoder")) c.memory = encoder_from(m.at("memory_encoder"), "model.memory_encoder");
      if (m.contains("gru")) {
        reject_unknown(m.at("gru"), {"num_layers", "dropout_rate"}, "model.gru");
        c.gru_layers = m.at("gru").value("num_layers", c.gru_layers);
        c.gru_dropout = m.at("gru").value("dropout_rate", c.gru_dropout);
      }
    }
    if (j.contains("pretrained_checkpoint")) {
      c.pretrained_checkpoint = resolve(base, j.at("pretrained_checkpoint").get<std::string>());
    }
    c.init_context_from_pretrained = j.value("init_context_from_pretrained", false);

    if (j.contains("train")) {
      reject_unknown(j.at("train"),
                     {"epochs", "batch_size", "lr", "warmup_fraction", "max_grad_norm", "beta1", "beta2", "eps",
                      "weight_decay", "eval_threads"},
                     "train");
      c.train = train::train_config_from_json(j.at("train"));
    }
    if (j.contains("pretrain")) {
      const auto& p = j.at("pretrain");
      reject_unknown(p, {"epochs", "batch_size", "lr", "warmup_fraction", "mask_rate", "max_grad_norm", "weight_decay"},
                     "pretrain");
      c.pretrain.epochs = p.value("epochs", c.pretrain.epochs);
      c.pretrain.batch_size = p.value("batch_size", c.pretrain.batch_size);
      c.pretrain.lr = p.value("lr", c.pretrain.lr);
      c.pretrain.warmup_fraction = p.value("warmup_fraction", c.pretrain.warmup_fraction);
      c.pretrain.mask_rate = p.value("mask_rate", c.pretrain.mask_rate);
      c.pretrain.max_grad_norm = p.value("max_grad_norm", c.pretrain.max_grad_norm);
      c.pretrain.adamw.weight_decay = p.value("weight_decay", c.pretrain.adamw.weight_decay);
    }
    c.seed = j.value("seed", c.seed);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.runs = j.value("runs", c.runs);
    if (j.contains("output_dir")) c.output_dir = resolve(base, j.at("output_dir").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  } catch (const TaxonomyError& e) {
    throw ConfigError(std::string("run config taxonomy: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  auto c = run_config_from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
  if (const char* env = std::getenv("COMPM_SEED"); env && *env) c.seed = parse_seed(env, "COMPM_SEED");
  return c;
}

void RunConfig::validate(bool for_training) const {
  require_file(train_path, "training split");
  if (dev_path) require_file(*dev_path, "dev split");
  if (test_path) require_file(*test_path, "test split");
  for (const auto& p : pretrain_paths) require_file(p, "pretraining corpus");
  taxonomy.validate();
  if (speaker_pool == 0) throw ConfigError("speaker_pool must be positive");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must lie in (0, 1]");
  if (runs == 0) throw ConfigError("runs must be at least 1");
  train.validate();
  if (!for_training) {
    if (!memory) throw ConfigError("model.memory_encoder is required: it defines the pretrained encoder");
    auto p = pretrain;
    p.encoder = *memory;
    p.encoder.vocab_size = 1;
    p.validate();
    return;
  }
  if (model::uses_memory_encoder(variant) && !memory) {
    throw ConfigError("variant " + model::to_string(variant) + " needs model.memory_encoder");
  }
  if (model::uses_context_encoder(variant) && !context) {
    throw ConfigError("variant " + model::to_string(variant) + " needs model.context_encoder");
  }
  if (model::loads_pretrained_memory(variant)) {
    if (!pretrained_checkpoint) {
      throw ConfigError("variant " + model::to_string(variant) +
                        " starts from a pretrained memory encoder; set pretrained_checkpoint (see `compm pretrain`)");
    }
    require_file(*pretrained_checkpoint, "pretrained checkpoint");
  }
  if (init_context_from_pretrained && !pretrained_checkpoint) {
    throw ConfigError("init_context_from_pretrained needs pretrained_checkpoint");
  }
  auto m = model_config();
  m.context.vocab_size = m.memory.vocab_size = 1;
  if (!model::uses_memory_encoder(variant)) m.memory = m.context;
  m.validate();
}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig m;
  if (context) m.context = *context;
  if (memory) m.memory = *memory;
  m.num_classes = taxonomy.classes.size();
  m.variant = variant;
  m.gru_layers = gru_layers;
  m.gru_dropout = gru_dropout;
  m.context.vocab_size = m.memory.vocab_size = 0;
  return m;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json data = {{"train", train_path.string()}};
  if (dev_path) data["dev"] = dev_path->string();
  if (test_path) data["test"] = test_path->string();
  if (!pretrain_paths.empty()) {
    data["pretrain"] = nlohmann::json::array();
    for (const auto& p : pretrain_paths) data["pretrain"].push_back(p.string());
  }
  nlohmann::json model = {{"gru", {{"num_layers", gru_layers}, {"dropout_rate", gru_dropout}}}};
  if (context) model["context_encoder"] = *context;
  if (memory) model["memory_encoder"] = *memory;
  nlohmann::json tr = train::to_json(train);
  tr.erase("seed");
  nlohmann::json j = {{"data", data},
                      {"taxonomy", taxonomy.to_json()},
                      {"variant", model::to_string(variant)},
                      {"speaker_pool", speaker_pool},
                      {"min_count", min_count},
                      {"model", model},
                      {"init_context_from_pretrained", init_context_from_pretrained},
                      {"train", tr},
                      {"pretrain",
                       {{"epochs", pretrain.epochs},
                        {"batch_size", pretrain.batch_size},
                        {"lr", pretrain.lr},
                        {"warmup_fraction", pretrain.warmup_fraction},
                        {"mask_rate", pretrain.mask_rate},
                        {"max_grad_norm", pretrain.max_grad_norm},
                        {"weight_decay", pretrain.adamw.weight_decay}}},
                      {"seed", seed},
                      {"train_fraction", train_fraction},
                      {"runs", runs},
                      {"output_dir", output_dir.string()}};
  if (pretrained_checkpoint) j["pretrained_checkpoint"] = pretrained_checkpoint->string();
  return j;
}

}  // namespace compm::app

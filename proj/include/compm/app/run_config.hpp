#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "compm/data/taxonomy.hpp"
#include "compm/model/variant.hpp"
#include "compm/train/pretrain.hpp"
#include "compm/train/trainer.hpp"

namespace compm::app {

/// Everything a pretrain / train run needs. Loaded from JSON:
///
///   {
///     "data": {"train": "train.jsonl", "dev": "dev.jsonl", "test": "test.jsonl",
///              "pretrain": ["extra.jsonl"]},
///     "taxonomy": "meld_emotion" | {"name": ..., "classes": [...], ...},
///     "variant": "CoMPM",
///     "speaker_pool": 9,
///     "min_count": 1,
///     "model": {"context_encoder": {...}, "memory_encoder": {...},
///               "gru": {"num_layers": 2, "dropout_rate": 0.3}},
///     "pretrained_checkpoint": "runs/pretrain/pretrained.ckpt",
///     "init_context_from_pretrained": false,
///     "train": {"epochs": 10, "batch_size": 8, "lr": 1e-5, ...},
///     "pretrain": {"epochs": 20, "batch_size": 16, "lr": 1e-3, "mask_rate": 0.15, ...},
///     "seed": 42, "train_fraction": 1.0, "runs": 1, "output_dir": "runs"
///   }
///
/// Relative paths resolve against the config file's directory. Unknown keys are errors.
struct RunConfig {
  std::filesystem::path train_path;
  std::optional<std::filesystem::path> dev_path;
  std::optional<std::filesystem::path> test_path;
  std::vector<std::filesystem::path> pretrain_paths;  // defaults to the training split

  data::LabelTaxonomy taxonomy = data::LabelTaxonomy::builtin("meld_emotion");
  model::VariantMode variant = model::VariantMode::CoMPM;
  std::size_t speaker_pool = 9;
  std::size_t min_count = 1;
  std::optional<nn::EncoderConfig> context;
  std::optional<nn::EncoderConfig> memory;
  std::size_t gru_layers = 2;
  double gru_dropout = 0.3;
  std::optional<std::filesystem::path> pretrained_checkpoint;
  bool init_context_from_pretrained = false;

  train::TrainConfig train;
  train::PretrainConfig pretrain;

  std::uint64_t seed = 42;
  double train_fraction = 1.0;
  std::size_t runs = 1;
  std::filesystem::path output_dir = "runs";

  /// Fails on missing files and variant/config inconsistencies.
  void validate(bool for_training = true) const;
  /// Model config for this variant; vocab_size is filled in by the model.
  model::ModelConfig model_config() const;
  nlohmann::json to_json() const;
};

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
/// Parses the file and applies the COMPM_SEED environment override.
RunConfig load_run_config(const std::filesystem::path& path);

/// Built-in profile name, or a path to a taxonomy JSON file.
data::LabelTaxonomy resolve_taxonomy(const std::string& name_or_path);

}  // namespace compm::app

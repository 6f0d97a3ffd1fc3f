#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "compm/model/compm_model.hpp"
#include "compm/train/evaluate.hpp"
#include "compm/train/optimizer.hpp"

namespace compm::train {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;  // utterance-turn targets per step
  double lr = 1e-5;
  double warmup_fraction = 0.1;
  double max_grad_norm = 10.0;
  AdamWConfig adamw;
  std::uint64_t seed = 42;
  std::size_t eval_threads = 1;
  /// Dev-best model is written here (atomically) whenever the dev metric improves.
  std::optional<std::filesystem::path> checkpoint_path;
  nn::StorageType storage = nn::StorageType::Float32;
  /// Extra fields merged into the saved checkpoint header.
  nlohmann::json checkpoint_header = nlohmann::json::object();

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;  // with dropout active
  std::optional<double> dev_metric;
};

struct TrainRunRecord {
  std::uint64_t seed = 0;
  std::string variant;
  std::string headline_metric;
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
  std::optional<std::size_t> best_epoch;
  std::optional<double> best_dev_metric;
  std::string checkpoint_path;
  bool diverged = false;
  std::string divergence;
  std::optional<MetricsReport> dev_report;   // of the selected model
  std::optional<MetricsReport> test_report;  // filled by callers that evaluate a test split
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const;
};

/// Fine-tunes `model` on every labeled turn of `train_set`.
///
/// Each epoch shuffles the conversation order (seeded), cuts the resulting targets into
/// batches, and runs forward -> mean cross-entropy -> backward -> clip -> AdamW -> schedule.
/// After each epoch the dev split is scored with the taxonomy's headline metric and the
/// best model is kept; the model holds the dev-best weights on return. Without a dev split
/// the last epoch is kept. A non-finite loss or gradient stops training with the last good
/// weights restored and `diverged` set.
TrainRunRecord train(model::CompmModel& model, const std::vector<data::EncodedConversation>& train_set,
                     const std::vector<data::EncodedConversation>& dev_set, const data::LabelTaxonomy& taxonomy,
                     const TrainConfig& config);

/// Mean and per-run values of one metric over repeated runs.
struct RunAverage {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;  // population
};
RunAverage average_runs(const std::vector<double>& values);

}  // namespace compm::train

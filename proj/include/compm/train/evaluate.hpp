#pragma once

#include <optional>
#include <string>
#include <vector>

#include "compm/data/context.hpp"
#include "compm/model/compm_model.hpp"
#include "compm/train/metrics.hpp"

namespace compm::train {

struct TurnPrediction {
  std::string conversation;
  std::size_t turn = 0;  // 0-based
  std::optional<std::size_t> gold;
  std::size_t predicted = 0;
  std::vector<double> probabilities;
};

/// Eval-mode predictions for every turn, in corpus order. With threads > 1 the
/// conversations are split across workers sharing the read-only model; the output
/// order does not depend on the thread count.
std::vector<TurnPrediction> predict_corpus(const model::CompmModel& model,
                                           const std::vector<data::EncodedConversation>& corpus,
                                           std::size_t threads = 1);

ConfusionMatrix confusion_of(const std::vector<TurnPrediction>& predictions, std::size_t classes);

/// Metrics over every labeled turn. Throws ArgumentError when nothing is labeled and
/// ConfigError when the model head and taxonomy disagree on the class count.
MetricsReport evaluate(const model::CompmModel& model, const std::vector<data::EncodedConversation>& corpus,
                       const data::LabelTaxonomy& taxonomy, std::size_t threads = 1);

}  // namespace compm::train

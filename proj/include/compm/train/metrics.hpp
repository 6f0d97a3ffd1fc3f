#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "compm/data/taxonomy.hpp"
#include "json.hpp"

namespace compm::train {

/// counts[gold][predicted].
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0) : counts_(classes, std::vector<std::size_t>(classes, 0)) {}

  void add(std::size_t gold, std::size_t predicted, std::size_t count = 1);
  void merge(const ConfusionMatrix& other);
  std::size_t classes() const { return counts_.size(); }
  std::size_t total() const;
  const std::vector<std::vector<std::size_t>>& counts() const { return counts_; }
  std::size_t at(std::size_t gold, std::size_t predicted) const { return counts_[gold][predicted]; }

 private:
  std::vector<std::vector<std::size_t>> counts_;
};

struct ClassScores {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
  bool excluded = false;
};

/// Per-class scores plus aggregates over the non-excluded classes:
///   weighted F1: support-weighted mean of class F1
///   macro F1:    unweighted mean of class F1
///   micro F1:    from correct predictions of non-excluded classes, divided by predictions
///                into and gold labels of non-excluded classes
/// A zero denominator yields 0.
struct MetricsReport {
  std::vector<ClassScores> classes;
  std::vector<std::vector<std::size_t>> confusion;
  std::set<std::size_t> excluded;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  double accuracy = 0.0;  // over every class
  std::size_t total = 0;
  data::HeadlineMetric headline = data::HeadlineMetric::WeightedF1;

  double headline_value() const;
  nlohmann::json to_json() const;
  /// Aligned-column text table.
  std::string to_table() const;
};

MetricsReport compute_metrics(const ConfusionMatrix& confusion, const std::vector<std::string>& class_names,
                              const std::set<std::size_t>& excluded = {},
                              data::HeadlineMetric headline = data::HeadlineMetric::WeightedF1);
MetricsReport compute_metrics(const ConfusionMatrix& confusion, const data::LabelTaxonomy& taxonomy);

}  // namespace compm::train

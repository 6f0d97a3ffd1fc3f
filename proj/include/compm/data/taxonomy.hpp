#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace compm::data {

enum class HeadlineMetric { WeightedF1, MicroF1, MacroF1 };

std::string to_string(HeadlineMetric metric);
HeadlineMetric parse_headline_metric(std::string_view name);

/// Ordered class inventory with metric conventions.
///
/// JSON form:
///   {"name": "...", "classes": [...], "exclude": [...],
///    "grouping": {"joyful": "positive", ...}, "headline": "weighted_f1"}
struct LabelTaxonomy {
  std::string name;
  std::vector<std::string> classes;
  std::set<std::string> excluded;               // dropped from metrics only, never from training
  std::map<std::string, std::string> grouping;  // optional, must cover every class when present
  HeadlineMetric headline = HeadlineMetric::WeightedF1;

  std::size_t size() const { return classes.size(); }
  /// Throws TaxonomyError listing the valid classes.
  std::size_t index_of(std::string_view label) const;
  bool contains(std::string_view label) const;
  std::vector<std::size_t> excluded_indices() const;

  /// Throws TaxonomyError on duplicates, unknown excluded classes, or a partial grouping.
  void validate() const;
  /// Taxonomy over the grouping's targets, in first-appearance order of `classes`.
  LabelTaxonomy grouped() const;

  static LabelTaxonomy from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Built-in profiles: meld_emotion, meld_sentiment, emorynlp_emotion, emorynlp_sentiment,
  /// iemocap, dailydialog.
  static LabelTaxonomy builtin(std::string_view name);
  static std::vector<std::string> builtin_names();
};

/// Grouped label for `emotion_label` (EmoryNLP: joyful/peaceful/powerful -> positive, ...).
std::string map_to_sentiment(const LabelTaxonomy& taxonomy, std::string_view emotion_label);

}  // namespace compm::data

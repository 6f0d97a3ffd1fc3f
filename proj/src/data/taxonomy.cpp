#include "compm/data/taxonomy.hpp"

#include <algorithm>

#include "compm/errors.hpp"

namespace compm::data {

std::string to_string(HeadlineMetric metric) {
  switch (metric) {
    case HeadlineMetric::WeightedF1: return "weighted_f1";
    case HeadlineMetric::MicroF1: return "micro_f1";
    case HeadlineMetric::MacroF1: return "macro_f1";
  }
  return "weighted_f1";
}

HeadlineMetric parse_headline_metric(std::string_view name) {
  if (name == "weighted_f1") return HeadlineMetric::WeightedF1;
  if (name == "micro_f1") return HeadlineMetric::MicroF1;
  if (name == "macro_f1") return HeadlineMetric::MacroF1;
  throw TaxonomyError("unknown headline metric '" + std::string(name) + "' (weighted_f1, micro_f1, macro_f1)");
}

namespace {

std::string joined(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

}  // namespace

std::size_t LabelTaxonomy::index_of(std::string_view label) const {
  const auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) {
    throw TaxonomyError("unknown label '" + std::string(label) + "' for taxonomy '" + name + "'; valid classes: " +
                        joined(classes));
  }
  return static_cast<std::size_t>(it - classes.begin());
}

bool LabelTaxonomy::contains(std::string_view label) const {
  return std::find(classes.begin(), classes.end(), label) != classes.end();
}

std::vector<std::size_t> LabelTaxonomy::excluded_indices() const {
  std::vector<std::size_t> out;
  for (const auto& label : excluded) out.push_back(index_of(label));
  std::sort(out.begin(), out.end());
  return out;
}

void LabelTaxonomy::validate() const {
  if (classes.empty()) throw TaxonomyError("taxonomy '" + name + "' has no classes");
  std::set<std::string> seen;
  for (const auto& c : classes)
    if (!seen.insert(c).second) throw TaxonomyError("taxonomy '" + name + "' repeats class '" + c + "'");
  for (const auto& e : excluded)
    if (!seen.count(e)) throw TaxonomyError("taxonomy '" + name + "' excludes unknown class '" + e + "'");
  if (excluded.size() >= classes.size()) throw TaxonomyError("taxonomy '" + name + "' excludes every class");
  if (!grouping.empty()) {
    for (const auto& c : classes)
      if (!grouping.count(c)) throw TaxonomyError("grouping of taxonomy '" + name + "' does not cover '" + c + "'");
    for (const auto& [from, to] : grouping)
      if (!seen.count(from)) throw TaxonomyError("grouping maps unknown class '" + from + "'");
  }
}

LabelTaxonomy LabelTaxonomy::grouped() const {
  if (grouping.empty()) throw TaxonomyError("taxonomy '" + name + "' defines no grouping");
  LabelTaxonomy out;
  out.name = name + "_grouped";
  for (const auto& c : classes) {
    const auto& g = grouping.at(c);
    if (std::find(out.classes.begin(), out.classes.end(), g) == out.classes.end()) out.classes.push_back(g);
  }
  out.headline = HeadlineMetric::WeightedF1;
  return out;
}

LabelTaxonomy LabelTaxonomy::from_json(const nlohmann::json& j) {
  LabelTaxonomy t;
  try {
    t.name = j.value("name", std::string("custom"));
    t.classes = j.at("classes").get<std::vector<std::string>>();
    if (j.contains("exclude")) {
      for (const auto& e : j.at("exclude")) t.excluded.insert(e.get<std::string>());
    }
    if (j.contains("grouping")) t.grouping = j.at("grouping").get<std::map<std::string, std::string>>();
    if (j.contains("headline")) t.headline = parse_headline_metric(j.at("headline").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw TaxonomyError(std::string("malformed taxonomy JSON: ") + e.what());
  }
  t.validate();
  return t;
}

nlohmann::json LabelTaxonomy::to_json() const {
  nlohmann::json j{{"name", name}, {"classes", classes}, {"headline", to_string(headline)}};
  j["exclude"] = std::vector<std::string>(excluded.begin(), excluded.end());
  if (!grouping.empty()) j["grouping"] = grouping;
  return j;
}

LabelTaxonomy LabelTaxonomy::builtin(std::string_view name) {
  LabelTaxonomy t;
  t.name = std::string(name);
  if (name == "meld_emotion") {
    t.classes = {"anger", "disgust", "sadness", "joy", "surprise", "fear", "neutral"};
  } else if (name == "meld_sentiment" || name == "emorynlp_sentiment") {
    t.classes = {"positive", "negative", "neutral"};
  } else if (name == "emorynlp_emotion") {
    t.classes = {"joyful", "peaceful", "powerful", "scared", "mad", "sad", "neutral"};
    t.grouping = {{"joyful", "positive"}, {"peaceful", "positive"}, {"powerful", "positive"},
                  {"scared", "negative"}, {"mad", "negative"},      {"sad", "negative"},
                  {"neutral", "neutral"}};
  } else if (name == "iemocap") {
    t.classes = {"happy", "sad", "angry", "excited", "frustrated", "neutral"};
  } else if (name == "dailydialog") {
    t.classes = {"anger", "disgust", "fear", "joy", "surprise", "sadness", "neutral"};
    t.excluded = {"neutral"};
    t.headline = HeadlineMetric::MicroF1;
  } else {
    std::string names;
    for (const auto& n : builtin_names()) names += (names.empty() ? "" : ", ") + n;
    throw TaxonomyError("unknown built-in taxonomy '" + std::string(name) + "'; available: " + names);
  }
  t.validate();
  return t;
}

std::vector<std::string> LabelTaxonomy::builtin_names() {
  return {"meld_emotion", "meld_sentiment", "emorynlp_emotion", "emorynlp_sentiment", "iemocap", "dailydialog"};
}

std::string map_to_sentiment(const LabelTaxonomy& taxonomy, std::string_view emotion_label) {
  if (taxonomy.grouping.empty()) throw TaxonomyError("taxonomy '" + taxonomy.name + "' defines no grouping");
  const auto it = taxonomy.grouping.find(std::string(emotion_label));
  if (it == taxonomy.grouping.end()) {
    throw TaxonomyError("label '" + std::string(emotion_label) + "' has no group in taxonomy '" + taxonomy.name + "'");
  }
  return it->second;
}

}  // namespace compm::data

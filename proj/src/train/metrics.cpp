#include "compm/train/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "compm/errors.hpp"

namespace compm::train {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }
double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

void ConfusionMatrix::add(std::size_t gold, std::size_t predicted, std::size_t count) {
  if (gold >= classes() || predicted >= classes()) {
    throw LabelError("class index outside a " + std::to_string(classes()) + "-class confusion matrix",
                     static_cast<long long>(gold >= classes() ? gold : predicted));
  }
  counts_[gold][predicted] += count;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes() != classes()) throw DimensionError("cannot merge confusion matrices of different sizes");
  for (std::size_t g = 0; g < classes(); ++g)
    for (std::size_t p = 0; p < classes(); ++p) counts_[g][p] += other.counts_[g][p];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts_)
    for (auto c : row) n += c;
  return n;
}

MetricsReport compute_metrics(const ConfusionMatrix& confusion, const std::vector<std::string>& class_names,
                              const std::set<std::size_t>& excluded, data::HeadlineMetric headline) {
  const std::size_t k = confusion.classes();
  if (class_names.size() != k) throw DimensionError("class names do not match the confusion matrix");
  MetricsReport r;
  r.confusion = confusion.counts();
  r.excluded = excluded;
  r.headline = headline;
  r.total = confusion.total();

  std::size_t correct = 0, micro_tp = 0, micro_pred = 0, micro_gold = 0, kept_support = 0, kept = 0;
  double weighted = 0.0, macro = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    ClassScores s;
    s.name = class_names[c];
    s.excluded = excluded.count(c) > 0;
    for (std::size_t o = 0; o < k; ++o) {
      s.support += confusion.at(c, o);
      s.predicted += confusion.at(o, c);
    }
    const auto tp = confusion.at(c, c);
    correct += tp;
    s.precision = ratio(static_cast<double>(tp), static_cast<double>(s.predicted));
    s.recall = ratio(static_cast<double>(tp), static_cast<double>(s.support));
    s.f1 = harmonic(s.precision, s.recall);
    if (!s.excluded) {
      micro_tp += tp;
      micro_pred += s.predicted;
      micro_gold += s.support;
      kept_support += s.support;
      weighted += static_cast<double>(s.support) * s.f1;
      macro += s.f1;
      ++kept;
    }
    r.classes.push_back(s);
  }
  r.weighted_f1 = ratio(weighted, static_cast<double>(kept_support));
  r.macro_f1 = ratio(macro, static_cast<double>(kept));
  r.micro_f1 = harmonic(ratio(static_cast<double>(micro_tp), static_cast<double>(micro_pred)),
                        ratio(static_cast<double>(micro_tp), static_cast<double>(micro_gold)));
  r.accuracy = ratio(static_cast<double>(correct), static_cast<double>(r.total));
  return r;
}

MetricsReport compute_metrics(const ConfusionMatrix& confusion, const data::LabelTaxonomy& taxonomy) {
  const auto ex = taxonomy.excluded_indices();
  return compute_metrics(confusion, taxonomy.classes, std::set<std::size_t>(ex.begin(), ex.end()),
                         taxonomy.headline);
}

double MetricsReport::headline_value() const {
  switch (headline) {
    case data::HeadlineMetric::MicroF1: return micro_f1;
    case data::HeadlineMetric::MacroF1: return macro_f1;
    case data::HeadlineMetric::WeightedF1: break;
  }
  return weighted_f1;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& c : classes) {
    per_class.push_back({{"class", c.name},
                         {"precision", c.precision},
                         {"recall", c.recall},
                         {"f1", c.f1},
                         {"support", c.support},
                         {"predicted", c.predicted},
                         {"excluded", c.excluded}});
  }
  nlohmann::json ex = nlohmann::json::array();
  for (auto i : excluded) ex.push_back(classes[i].name);
  return {{"weighted_f1", weighted_f1},
          {"macro_f1", macro_f1},
          {"micro_f1", micro_f1},
          {"accuracy", accuracy},
          {"total", total},
          {"headline", data::to_string(headline)},
          {"headline_value", headline_value()},
          {"excluded", ex},
          {"classes", per_class},
          {"confusion", confusion}};
}

std::string MetricsReport::to_table() const {
  std::size_t width = 13;
  for (const auto& c : classes) width = std::max(width, c.name.size() + 2);
  std::ostringstream out;
  char line[256];
  auto row = [&](const std::string& name, const std::string& rest) {
    out << name << std::string(width - std::min(width, name.size()), ' ') << rest << '\n';
  };
  std::snprintf(line, sizeof line, "%10s %10s %10s %10s", "precision", "recall", "f1", "support");
  row("class", line);
  for (const auto& c : classes) {
    std::snprintf(line, sizeof line, "%10.4f %10.4f %10.4f %10zu%s", c.precision, c.recall, c.f1, c.support,
                  c.excluded ? "  (excluded)" : "");
    row(c.name, line);
  }
  out << '\n';
  std::snprintf(line, sizeof line, "%10.4f", weighted_f1);
  row("weighted_f1", line);
  std::snprintf(line, sizeof line, "%10.4f", macro_f1);
  row("macro_f1", line);
  std::snprintf(line, sizeof line, "%10.4f", micro_f1);
  row("micro_f1", line);
  std::snprintf(line, sizeof line, "%10.4f", accuracy);
  row("accuracy", line);
  return out.str();
}

}  // namespace compm::train

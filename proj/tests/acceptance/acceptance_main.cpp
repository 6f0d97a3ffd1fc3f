// Acceptance suite: one line per criterion, nonzero exit if any criterion fails.

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "compm/app/commands.hpp"
#include "compm/data/corpus.hpp"
#include "compm/model/compm_model.hpp"
#include "compm/nn/gru.hpp"
#include "compm/tensor/grad_check.hpp"
#include "compm/train/metrics.hpp"
#include "compm/train/trainer.hpp"
#include "model_fixtures.hpp"
#include "primitive_cases.hpp"
#include "reference_math.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

namespace {

using namespace compm;
using Clock = std::chrono::steady_clock;

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome fail(std::string detail) { return {Status::Fail, std::move(detail)}; }
Outcome verdict(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

std::string fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, format, args...);
  return buffer;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

model::ModelConfig small_model(model::VariantMode variant, std::size_t classes) {
  model::ModelConfig c;
  c.context.hidden_dim = c.memory.hidden_dim = 16;
  c.context.ffn_dim = c.memory.ffn_dim = 32;
  c.context.num_layers = c.memory.num_layers = 1;
  c.num_classes = classes;
  c.variant = variant;
  return c;
}

train::TrainConfig synthetic_training(std::size_t epochs, std::uint64_t seed) {
  train::TrainConfig c;
  c.epochs = epochs;
  c.lr = 1e-3;
  c.seed = seed;
  return c;
}

// 1
Outcome gradients_match_finite_differences() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t checks = 0;
  for (const auto& c : test::primitive_cases()) {
    Rng rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
      auto [inputs, loss] = c.make(rng);
      const auto r = check_gradients(loss, inputs);
      Tape::current().clear();
      ++checks;
      if (r.max_relative_error > worst) {
        worst = r.max_relative_error;
        worst_name = c.name;
      }
    }
  }

  const auto vocab = test::make_vocab();
  for (bool projected : {false, true}) {
    auto config = test::model_config(model::VariantMode::CoMPM);
    config.context = test::encoder(8, 1);
    config.memory = test::encoder(projected ? 6 : 8, 1);
    model::CompmModel m(config, vocab, 20);
    Rng rng(20);
    test::randomize(m.parameters(), rng, 0.3);
    const auto conv = test::make_conversation(vocab, {0, 1, 0, 1}, rng);
    const std::vector<std::size_t> turns{2, 3};
    const std::vector<std::size_t> labels{1, 2};
    auto loss = [&] {
      const auto traces = m.forward_turns(conv, turns);
      return cross_entropy(concatenate({traces[0].logits, traces[1].logits}, 0), labels);
    };
    std::vector<Tensor> params;
    for (const auto& p : m.trainable_parameters()) params.push_back(p.tensor);
    const auto r = check_gradients(loss, params);
    Tape::current().clear();
    ++checks;
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_name = projected ? "model (projected memory)" : "model";
    }
  }
  const double elapsed = seconds_since(start);
  return verdict(worst < 1e-4 && elapsed < 120.0,
                 fmt("%zu checks, worst relative error %.2e (%s), %.1fs", checks, worst, worst_name.c_str(), elapsed));
}

// 2
Outcome gru_matches_reference() {
  nn::GruConfig config;
  config.input_dim = 5;
  config.hidden_dim = 4;
  config.num_layers = 2;
  Rng rng(8);
  nn::GruTracker gru(config, rng);
  nn::ParameterList params;
  gru.append_parameters("gru", params);
  test::randomize(params, rng, 0.6);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.next() % 6;
    const auto sequence = test::random_tensor({n, 5}, rng, false);
    const auto expected = test::reference_gru(gru, sequence);
    const auto out = gru.forward(sequence);
    for (std::size_t u = 0; u < 4; ++u) worst = std::max(worst, std::abs(out.data()[u] - expected[u]));
  }
  return verdict(worst <= 1e-9, fmt("50 sequences, max abs difference %.2e", worst));
}

// 3
Outcome no_history_is_context_only() {
  const auto vocab = test::make_vocab();
  std::size_t compared = 0, mismatched = 0;
  for (auto [h_c, h_k] : {std::pair<std::size_t, std::size_t>{8, 8}, {8, 4}}) {
    model::CompmModel m(test::model_config(model::VariantMode::CoMPM, h_c, h_k), vocab, 15);
    Rng rng(15);
    test::randomize(m.parameters(), rng, 0.3);
    const auto conv = test::make_conversation(vocab, {0, 1, 2, 3, 4}, rng);
    for (std::size_t t = 0; t < conv.speakers.size(); ++t) {
      const auto trace = m.forward(conv, t);
      if (!trace.memories.empty()) return fail("unexpected memory for a first-time speaker");
      const auto reference = m.context_only_logits(conv, t);
      for (std::size_t k = 0; k < 7; ++k, ++compared) mismatched += trace.logits.data()[k] != reference.data()[k];
    }
  }
  return verdict(mismatched == 0, fmt("%zu logits compared, %zu differ", compared, mismatched));
}

// 4
Outcome frozen_memory_encoder_unchanged() {
  const auto data = test::history_corpus(20, 0, 10);
  std::map<model::VariantMode, bool> changed;
  std::size_t steps = 0;
  for (auto variant : {model::VariantMode::CoMPMFrozen, model::VariantMode::CoMPM}) {
    model::CompmModel m(small_model(variant, data.taxonomy.classes.size()), data.vocab, 10);
    nn::ParameterList pm;
    for (const auto& p : m.parameters())
      if (p.name.rfind("pm.", 0) == 0) pm.push_back(p);
    const auto before = nn::snapshot(pm);
    const auto record = train::train(m, data.train_encoded, {}, data.taxonomy, synthetic_training(2, 10));
    steps = record.step_losses.size();
    if (steps < 10) return fail(fmt("only %zu steps", steps));
    changed[variant] = nn::snapshot(pm) != before;
  }
  return verdict(!changed[model::VariantMode::CoMPMFrozen] && changed[model::VariantMode::CoMPM],
                 fmt("%zu steps; frozen memory encoder %s, joint memory encoder %s", steps,
                     changed[model::VariantMode::CoMPMFrozen] ? "changed" : "unchanged",
                     changed[model::VariantMode::CoMPM] ? "changed" : "unchanged"));
}

// Per-class F1 from a flat list of (gold, predicted) pairs.
struct CountedMetrics {
  double weighted = 0, macro = 0, micro = 0, accuracy = 0;
};

CountedMetrics count_metrics(const std::vector<std::pair<std::size_t, std::size_t>>& pairs, std::size_t classes,
                             const std::set<std::size_t>& excluded) {
  std::vector<double> tp(classes), predicted(classes), gold(classes);
  double correct = 0;
  for (auto [g, p] : pairs) {
    gold[g] += 1;
    predicted[p] += 1;
    if (g == p) {
      tp[g] += 1;
      correct += 1;
    }
  }
  CountedMetrics m;
  double support = 0, kept = 0, tp_kept = 0, pred_kept = 0, gold_kept = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (excluded.count(c)) continue;
    const double precision = predicted[c] > 0 ? tp[c] / predicted[c] : 0.0;
    const double recall = gold[c] > 0 ? tp[c] / gold[c] : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    m.weighted += gold[c] * f1;
    m.macro += f1;
    support += gold[c];
    kept += 1;
    tp_kept += tp[c];
    pred_kept += predicted[c];
    gold_kept += gold[c];
  }
  m.weighted = support > 0 ? m.weighted / support : 0.0;
  m.macro = kept > 0 ? m.macro / kept : 0.0;
  const double micro_p = pred_kept > 0 ? tp_kept / pred_kept : 0.0;
  const double micro_r = gold_kept > 0 ? tp_kept / gold_kept : 0.0;
  m.micro = micro_p + micro_r > 0 ? 2 * micro_p * micro_r / (micro_p + micro_r) : 0.0;
  m.accuracy = pairs.empty() ? 0.0 : correct / static_cast<double>(pairs.size());
  return m;
}

// 5
Outcome metrics_match_counting_oracle() {
  Rng rng(55);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t classes = 2 + rng.next() % 6;
    std::set<std::size_t> excluded;
    if (trial % 2 == 1) excluded.insert(rng.next() % classes);
    std::vector<std::pair<std::size_t, std::size_t>> pairs(rng.next() % 200);
    train::ConfusionMatrix conf(classes);
    for (auto& [g, p] : pairs) {
      g = rng.next() % classes;
      p = rng.next() % 3 == 0 ? g : rng.next() % classes;
      conf.add(g, p);
    }
    std::vector<std::string> names;
    for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
    const auto report = train::compute_metrics(conf, names, excluded, data::HeadlineMetric::WeightedF1);
    const auto oracle = count_metrics(pairs, classes, excluded);
    for (double d : {report.weighted_f1 - oracle.weighted, report.macro_f1 - oracle.macro,
                     report.micro_f1 - oracle.micro, report.accuracy - oracle.accuracy}) {
      worst = std::max(worst, std::abs(d));
    }
  }

  // DailyDialog drops neutral from every F1 average.
  const auto dd = data::LabelTaxonomy::builtin("dailydialog");
  const std::size_t neutral = dd.index_of("neutral");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  train::ConfusionMatrix conf(dd.classes.size());
  for (std::size_t i = 0; i < 300; ++i) {
    const std::size_t g = i % 2 == 0 ? neutral : rng.next() % dd.classes.size();
    const std::size_t p = rng.next() % 2 == 0 ? g : rng.next() % dd.classes.size();
    pairs.emplace_back(g, p);
    conf.add(g, p);
  }
  const auto report = train::compute_metrics(conf, dd);
  const auto oracle = count_metrics(pairs, dd.classes.size(), {neutral});
  const double dd_error = std::abs(report.micro_f1 - oracle.micro);
  const bool excludes_neutral = report.excluded == std::set<std::size_t>{neutral} &&
                                report.headline == data::HeadlineMetric::MicroF1;
  return verdict(worst <= 1e-9 && dd_error <= 1e-9 && excludes_neutral,
                 fmt("100 random matrices max error %.2e; dailydialog micro-F1 error %.2e, neutral %s", worst,
                     dd_error, excludes_neutral ? "excluded" : "NOT excluded"));
}

// 6
Outcome keyword_corpus_is_learned() {
  const auto start = Clock::now();
  const auto data = test::keyword_corpus(200, 50, 1);
  model::CompmModel m(small_model(model::VariantMode::CoMPM, 7), data.vocab, 1);
  const auto record = train::train(m, data.train_encoded, data.dev_encoded, data.taxonomy, synthetic_training(30, 1));
  const double train_acc = train::evaluate(m, data.train_encoded, data.taxonomy).accuracy;
  const double dev_acc = train::evaluate(m, data.dev_encoded, data.taxonomy).accuracy;
  const double elapsed = seconds_since(start);
  return verdict(!record.diverged && train_acc >= 0.95 && dev_acc >= 0.85 && elapsed < 600.0,
                 fmt("train accuracy %.3f, dev accuracy %.3f after %zu epochs, %.1fs", train_acc, dev_acc,
                     record.epochs.size(), elapsed));
}

// 7
Outcome history_corpus_ordering() {
  std::map<model::VariantMode, double> mean;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto data = test::history_corpus(200, 50, 100 + seed);
    for (auto v : {model::VariantMode::CoMPM, model::VariantMode::CoMOnly, model::VariantMode::PMOnly}) {
      model::CompmModel m(small_model(v, data.taxonomy.classes.size()), data.vocab, seed);
      train::train(m, data.train_encoded, data.dev_encoded, data.taxonomy, synthetic_training(30, seed));
      mean[v] += train::evaluate(m, data.dev_encoded, data.taxonomy).accuracy / 3.0;
    }
  }
  const double compm = mean[model::VariantMode::CoMPM];
  const double com = mean[model::VariantMode::CoMOnly];
  const double pm = mean[model::VariantMode::PMOnly];
  return verdict(compm >= com && com >= pm, fmt("mean dev accuracy CoMPM %.3f, CoM %.3f, PM %.3f", compm, com, pm));
}

// 8
Outcome runs_are_deterministic() {
  const auto data = test::keyword_corpus(30, 10, 9);
  auto run = [&] {
    model::CompmModel m(small_model(model::VariantMode::CoMPM, 7), data.vocab, 9);
    auto record = train::train(m, data.train_encoded, data.dev_encoded, data.taxonomy, synthetic_training(3, 9));
    const auto report = train::evaluate(m, data.dev_encoded, data.taxonomy, 2);
    return std::make_pair(record.step_losses, report.to_json());
  };
  const auto a = run();
  const auto b = run();
  return verdict(!a.first.empty() && a == b,
                 fmt("%zu step losses and final metrics %s", a.first.size(), a == b ? "identical" : "differ"));
}

// 9
Outcome meld_statistics() {
  const char* dir = std::getenv("COMPM_MELD_DIR");
  if (!dir) return {Status::Skip, "COMPM_MELD_DIR not set"};
  const std::filesystem::path root(dir);
  const std::vector<std::tuple<std::string, std::size_t, std::size_t>> expected{
      {"train", 1038, 9989}, {"dev", 114, 1109}, {"test", 280, 2610}};
  std::vector<std::pair<std::string, std::filesystem::path>> splits;
  for (const auto& [split, dialogues, utterances] : expected) splits.emplace_back(split, root / (split + ".jsonl"));
  std::ostringstream out;
  if (app::cmd_stats(splits, data::LabelTaxonomy::builtin("meld_emotion"), true, out) != app::kExitOk) {
    return fail("stats command failed");
  }
  const auto rows = nlohmann::json::parse(out.str());
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& [split, dialogues, utterances] = expected[i];
    const auto got_dialogues = rows[i]["dialogues"].get<std::size_t>();
    const auto got_utterances = rows[i]["utterances"].get<std::size_t>();
    ok &= got_dialogues == dialogues && got_utterances == utterances;
    detail += fmt("%s %zu/%zu ", split.c_str(), got_dialogues, got_utterances);
  }
  return verdict(ok, detail + "(dialogues/utterances)");
}

// 10
Outcome padding_leaves_context_unchanged() {
  const auto vocab = test::make_vocab(30);
  model::CompmModel m(test::model_config(model::VariantMode::CoMPM), vocab, 5);
  Rng rng(10);
  test::randomize(m.parameters(), rng, 0.3);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<nn::TokenId> ids{data::Vocabulary::cls_id()};
    const std::size_t words = 1 + rng.next() % 12;
    for (std::size_t i = 0; i < words; ++i) {
      ids.push_back(i == 0 || rng.next() % 4 == 0
                        ? vocab.speaker_id(rng.next() % 3)
                        : vocab.reserved_count() + rng.next() % (vocab.size() - vocab.reserved_count()));
    }
    const auto plain = m.encode_context(ids, nn::AttentionMask::all(ids.size()));
    const std::size_t pads = 1 + rng.next() % 16;
    const std::size_t kept = ids.size();
    ids.insert(ids.end(), pads, data::Vocabulary::pad_id());
    const auto padded = m.encode_context(ids, nn::AttentionMask::with_padding(kept, pads));
    for (std::size_t j = 0; j < plain.size(); ++j) worst = std::max(worst, std::abs(plain.data()[j] - padded.data()[j]));
  }
  return verdict(worst < 1e-5, fmt("20 contexts, max change %.2e", worst));
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient_check", gradients_match_finite_differences},
      {"gru_reference", gru_matches_reference},
      {"no_history_identity", no_history_is_context_only},
      {"frozen_memory_encoder", frozen_memory_encoder_unchanged},
      {"metrics_oracle", metrics_match_counting_oracle},
      {"keyword_corpus", keyword_corpus_is_learned},
      {"history_ordering", history_corpus_ordering},
      {"determinism", runs_are_deterministic},
      {"meld_statistics", meld_statistics},
      {"padding_invariance", padding_leaves_context_unchanged},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome{Status::Fail, ""};
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = fail(std::string("exception: ") + e.what());
    }
    Tape::current().clear();
    const char* tag = outcome.status == Status::Pass ? "PASS" : outcome.status == Status::Skip ? "SKIP" : "FAIL";
    failures += outcome.status == Status::Fail;
    std::printf("[%s] %zu %s: %s\n", tag, i + 1, criteria[i].first.c_str(), outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

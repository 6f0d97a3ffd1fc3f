#include "compm/app/commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <set>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "compm/data/context.hpp"
#include "compm/errors.hpp"
#include "compm/model/compm_model.hpp"
#include "compm/train/evaluate.hpp"
#include "compm/util/atomic_file.hpp"

namespace compm::app {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const TaxonomyError*>(&e) ||
      dynamic_cast<const CapacityError*>(&e) || dynamic_cast<const LabelError*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitData;
  }
  return kExitUsage;
}

// --- stats ------------------------------------------------------------------------

SplitStats corpus_stats(const std::string& name, const std::vector<data::Conversation>& corpus) {
  SplitStats s;
  s.name = name;
  s.dialogues = corpus.size();
  for (const auto& conv : corpus) {
    s.utterances += conv.utterances.size();
    ++s.participants[conv.participants().size()];
    for (const auto& u : conv.utterances) {
      if (u.label) {
        ++s.classes[*u.label];
      } else {
        ++s.unlabeled;
      }
    }
  }
  s.average_turns = s.dialogues ? static_cast<double>(s.utterances) / static_cast<double>(s.dialogues) : 0.0;
  return s;
}

std::string format_stats(const std::vector<SplitStats>& splits) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %10s %11s %10s\n", "split", "dialogues", "utterances", "avg_turns");
  out << line;
  for (const auto& s : splits) {
    std::snprintf(line, sizeof line, "%-12s %10zu %11zu %10.2f\n", s.name.c_str(), s.dialogues, s.utterances,
                  s.average_turns);
    out << line;
  }
  std::set<std::string> labels;
  for (const auto& s : splits)
    for (const auto& [label, n] : s.classes) labels.insert(label);
  if (!labels.empty()) {
    out << "\nclass histogram\n";
    std::snprintf(line, sizeof line, "%-14s", "class");
    out << line;
    for (const auto& s : splits) {
      std::snprintf(line, sizeof line, " %10s", s.name.c_str());
      out << line;
    }
    out << '\n';
    for (const auto& label : labels) {
      std::snprintf(line, sizeof line, "%-14s", label.c_str());
      out << line;
      for (const auto& s : splits) {
        const auto it = s.classes.find(label);
        std::snprintf(line, sizeof line, " %10zu", it == s.classes.end() ? std::size_t{0} : it->second);
        out << line;
      }
      out << '\n';
    }
  }
  out << "\nparticipants per dialogue\n";
  for (const auto& s : splits) {
    out << s.name << ':';
    for (const auto& [count, n] : s.participants) out << ' ' << count << "->" << n;
    out << '\n';
  }
  return out.str();
}

nlohmann::json stats_to_json(const std::vector<SplitStats>& splits) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : splits) {
    nlohmann::json participants = nlohmann::json::object();
    for (const auto& [count, n] : s.participants) participants[std::to_string(count)] = n;
    j.push_back({{"split", s.name},
                 {"dialogues", s.dialogues},
                 {"utterances", s.utterances},
                 {"unlabeled", s.unlabeled},
                 {"average_turns", s.average_turns},
                 {"classes", s.classes},
                 {"participants", participants}});
  }
  return j;
}

int cmd_stats(const std::vector<std::pair<std::string, fs::path>>& splits,
              const std::optional<data::LabelTaxonomy>& taxonomy, bool json, std::ostream& out) {
  std::vector<SplitStats> stats;
  for (const auto& [name, path] : splits) {
    const auto corpus = data::load_corpus(path, taxonomy ? &*taxonomy : nullptr);
    if (corpus.empty()) spdlog::warn("split '{}' ({}) holds no conversations", name, path.string());
    stats.push_back(corpus_stats(name, corpus));
  }
  out << (json ? stats_to_json(stats).dump(2) + "\n" : format_stats(stats));
  return kExitOk;
}

// --- pretrain ---------------------------------------------------------------------

namespace {

std::vector<data::Conversation> load_split(const fs::path& path, const data::LabelTaxonomy& taxonomy) {
  auto corpus = data::load_corpus(path, &taxonomy);
  spdlog::info("loaded {} conversations from {}", corpus.size(), path.string());
  return corpus;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return s.str();
}

nlohmann::json average_json(const train::RunAverage& a) {
  return {{"mean", a.mean}, {"stddev", a.stddev}, {"runs", a.values}};
}

data::LabelTaxonomy checkpoint_taxonomy(const nn::Checkpoint& ckpt, const std::optional<std::string>& override_name) {
  if (override_name) return resolve_taxonomy(*override_name);
  if (!ckpt.header.contains("taxonomy")) {
    throw ConfigError("checkpoint stores no taxonomy; pass --taxonomy");
  }
  return data::LabelTaxonomy::from_json(ckpt.header.at("taxonomy"));
}

}  // namespace

int cmd_pretrain(const RunConfig& config, const fs::path& out_dir, std::ostream& out) {
  config.validate(false);
  std::vector<data::Conversation> corpus = load_split(config.train_path, config.taxonomy);
  for (const auto& p : config.pretrain_paths) {
    auto extra = data::load_corpus(p);
    corpus.insert(corpus.end(), extra.begin(), extra.end());
  }
  const auto texts = data::utterance_texts(corpus);
  const auto vocab = data::Vocabulary::build(texts, config.speaker_pool, config.min_count);
  std::vector<std::vector<nn::TokenId>> utterances;
  for (const auto& t : texts) utterances.push_back(vocab.tokenize(t));

  auto pc = config.pretrain;
  pc.encoder = *config.memory;
  pc.encoder.vocab_size = vocab.size();
  pc.seed = config.seed;
  const auto result = train::pretrain_memory_encoder(vocab, utterances, pc);

  fs::create_directories(out_dir);
  result.save(out_dir / "pretrained.ckpt", vocab);
  vocab.save(out_dir / "vocab.txt");
  write_json(out_dir / "pretrain_record.json", {{"seed", config.seed},
                                                {"utterances", utterances.size()},
                                                {"vocab_size", vocab.size()},
                                                {"epoch_losses", result.epoch_losses},
                                                {"config", config.to_json()}});
  out << "pretrained encoder: " << (out_dir / "pretrained.ckpt").string() << "\n"
      << "epoch loss " << result.epoch_losses.front() << " -> " << result.epoch_losses.back() << "\n";
  return kExitOk;
}

// --- train ------------------------------------------------------------------------

int cmd_train(RunConfig config, const TrainOverrides& o, std::ostream& out) {
  if (o.variant) config.variant = *o.variant;
  if (o.train_fraction) config.train_fraction = *o.train_fraction;
  if (o.seed) config.seed = *o.seed;
  if (o.runs) config.runs = *o.runs;
  config.validate(true);

  std::optional<nn::Checkpoint> pretrained;
  const bool wants_pretrained =
      model::loads_pretrained_memory(config.variant) || config.init_context_from_pretrained;
  if (wants_pretrained) {
    pretrained = nn::load_checkpoint(*config.pretrained_checkpoint);
    auto stored = pretrained->header.at("encoder").get<nn::EncoderConfig>();
    auto expected = *config.memory;
    expected.vocab_size = stored.vocab_size;
    if (model::uses_memory_encoder(config.variant) && !(stored == expected)) {
      throw ConfigError("pretrained encoder config differs from model.memory_encoder");
    }
  }

  const auto train_full = load_split(config.train_path, config.taxonomy);
  const auto dev = config.dev_path ? load_split(*config.dev_path, config.taxonomy) : std::vector<data::Conversation>{};
  const auto test =
      config.test_path ? load_split(*config.test_path, config.taxonomy) : std::vector<data::Conversation>{};
  const auto vocab = pretrained ? model::vocabulary_from_json(pretrained->header.at("vocab"))
                                : data::Vocabulary::build(data::utterance_texts(train_full), config.speaker_pool,
                                                          config.min_count);
  const auto train_subset = data::subsample_training(train_full, config.train_fraction, config.seed);
  spdlog::info("training on {} of {} conversations", train_subset.size(), train_full.size());
  const auto train_enc = data::encode_corpus(vocab, train_subset, &config.taxonomy);
  const auto dev_enc = data::encode_corpus(vocab, dev, &config.taxonomy);
  const auto test_enc = data::encode_corpus(vocab, test, &config.taxonomy);

  const fs::path dir =
      o.out ? *o.out : config.output_dir / (timestamp() + "-" + model::to_string(config.variant));
  fs::create_directories(dir);
  write_json(dir / "config.json", config.to_json());
  vocab.save(dir / "vocab.txt");

  nlohmann::json runs = nlohmann::json::array();
  std::vector<double> dev_scores, test_scores;
  bool diverged = false;
  for (std::size_t r = 0; r < config.runs; ++r) {
    const std::uint64_t seed = config.seed + r;
    model::CompmModel model(config.model_config(), vocab, seed);
    if (pretrained) {
      model.load_pretrained_memory(*pretrained);
      if (config.init_context_from_pretrained) model.load_pretrained_context(*pretrained);
    }
    auto tc = config.train;
    tc.seed = seed;
    const fs::path run_dir = dir / ("run" + std::to_string(r + 1));
    fs::create_directories(run_dir);
    tc.checkpoint_path = run_dir / "best.ckpt";
    tc.checkpoint_header = {{"taxonomy", config.taxonomy.to_json()}, {"run", r + 1}};

    auto record = train::train(model, train_enc, dev_enc, config.taxonomy, tc);
    if (!test_enc.empty() && !record.diverged) {
      record.test_report = train::evaluate(model, test_enc, config.taxonomy, tc.eval_threads);
      test_scores.push_back(record.test_report->headline_value());
    }
    if (record.best_dev_metric) dev_scores.push_back(*record.best_dev_metric);
    diverged |= record.diverged;
    const auto j = record.to_json();
    write_json(run_dir / "run_record.json", j);
    runs.push_back(j);

    out << "run " << r + 1 << "/" << config.runs << " seed " << seed;
    if (record.best_dev_metric) {
      out << "  best epoch " << *record.best_epoch << "  dev " << record.headline_metric << " "
          << *record.best_dev_metric;
    }
    if (record.test_report) out << "  test " << record.headline_metric << " " << record.test_report->headline_value();
    if (record.diverged) out << "  DIVERGED: " << record.divergence;
    out << "\n";
  }

  nlohmann::json summary = {{"variant", model::to_string(config.variant)},
                            {"seed", config.seed},
                            {"train_fraction", config.train_fraction},
                            {"train_conversations", train_subset.size()},
                            {"headline_metric", data::to_string(config.taxonomy.headline)},
                            {"runs", runs}};
  if (!dev_scores.empty()) summary["dev_average"] = average_json(train::average_runs(dev_scores));
  if (!test_scores.empty()) {
    const auto avg = train::average_runs(test_scores);
    summary["test_average"] = average_json(avg);
    out << "test " << data::to_string(config.taxonomy.headline) << " mean over " << test_scores.size()
        << " run(s): " << avg.mean << "\n";
  }
  write_json(dir / "run_record.json", summary);
  out << "outputs: " << dir.string() << "\n";
  return diverged ? kExitNumeric : kExitOk;
}

// --- eval / predict ---------------------------------------------------------------

int cmd_eval(const fs::path& checkpoint, const fs::path& corpus_path, const std::optional<std::string>& taxonomy_name,
             std::size_t threads, bool json, const std::optional<fs::path>& report_path, std::ostream& out) {
  const auto ckpt = nn::load_checkpoint(checkpoint);
  const auto taxonomy = checkpoint_taxonomy(ckpt, taxonomy_name);
  const auto model = model::CompmModel::from_checkpoint(ckpt);
  if (model.num_classes() != taxonomy.classes.size()) {
    throw ConfigError("checkpoint head has " + std::to_string(model.num_classes()) + " classes but taxonomy '" +
                      taxonomy.name + "' has " + std::to_string(taxonomy.classes.size()));
  }
  const auto corpus = data::load_corpus(corpus_path, &taxonomy);
  const auto encoded = data::encode_corpus(model.vocabulary(), corpus, &taxonomy);
  const auto report = train::evaluate(model, encoded, taxonomy, threads);
  const auto j = report.to_json();
  if (report_path) write_json(*report_path, j);
  out << (json ? j.dump(2) + "\n" : report.to_table());
  return kExitOk;
}

int cmd_predict(const fs::path& checkpoint, const fs::path& input, std::optional<std::size_t> turn, bool json,
                std::ostream& out) {
  const auto ckpt = nn::load_checkpoint(checkpoint);
  std::vector<std::string> names;
  const auto model = model::CompmModel::from_checkpoint(ckpt);
  if (ckpt.header.contains("taxonomy")) names = data::LabelTaxonomy::from_json(ckpt.header.at("taxonomy")).classes;
  if (names.size() != model.num_classes()) {
    names.clear();
    for (std::size_t c = 0; c < model.num_classes(); ++c) names.push_back("class_" + std::to_string(c));
  }
  const auto corpus = data::load_corpus(input);
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream table;
  char line[128];
  for (const auto& conv : corpus) {
    const auto encoded = data::encode_conversation(model.vocabulary(), conv);
    std::vector<std::size_t> turns;
    if (turn) {
      if (*turn == 0 || *turn > encoded.size()) {
        throw ArgumentError("--turn " + std::to_string(*turn) + " outside conversation '" + conv.id + "' of " +
                            std::to_string(encoded.size()) + " turns");
      }
      turns.push_back(*turn - 1);
    } else {
      for (std::size_t t = 0; t < encoded.size(); ++t) turns.push_back(t);
    }
    NoGradGuard guard;
    for (const auto& trace : model.forward_turns(encoded, turns)) {
      const auto& u = conv.utterances[trace.turn];
      nlohmann::json probs = nlohmann::json::object();
      for (std::size_t c = 0; c < names.size(); ++c) probs[names[c]] = trace.probabilities[c];
      rows.push_back({{"conv_id", conv.id},
                      {"turn", u.turn},
                      {"speaker", u.speaker},
                      {"predicted", names[trace.predicted]},
                      {"probabilities", probs}});
      table << conv.id << "\t" << u.turn << "\t" << u.speaker << "\t" << names[trace.predicted];
      for (std::size_t c = 0; c < names.size(); ++c) {
        std::snprintf(line, sizeof line, "\t%s=%.4f", names[c].c_str(), trace.probabilities[c]);
        table << line;
      }
      table << "\n";
    }
  }
  out << (json ? rows.dump(2) + "\n" : table.str());
  return kExitOk;
}

// --- entry point ------------------------------------------------------------------

int run_cli(int argc, char** argv, std::ostream& out) {
  CLI::App app{"compm: emotion recognition in conversation with context and speaker memory"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false, verbose = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::vector<std::string> stats_inputs;
  std::string taxonomy_name;
  bool json = false;
  auto* stats = app.add_subcommand("stats", "Dialogue, utterance, class and participant counts per split");
  stats->add_option("corpora", stats_inputs, "Corpus files, optionally as name=path")->required();
  stats->add_option("--taxonomy", taxonomy_name, "Validate labels against a taxonomy (name or JSON file)");
  stats->add_flag("--json", json, "JSON output");

  std::string config_path, out_path;
  std::uint64_t seed = 0;
  auto* pretrain = app.add_subcommand("pretrain", "Masked-token pretraining of the memory encoder");
  pretrain->add_option("--config", config_path, "Run config JSON")->required();
  pretrain->add_option("--seed", seed, "Override the config seed");
  pretrain->add_option("--out", out_path, "Output directory");

  std::string variant;
  double fraction = 1.0;
  std::size_t runs = 1;
  auto* trainc = app.add_subcommand("train", "Fine-tune a model variant with dev-best selection");
  trainc->add_option("--config", config_path, "Run config JSON")->required();
  trainc->add_option("--variant", variant, "CoM_only, PM_only, CoMPM, CoMPM_frozen or CoMPM_scratch");
  trainc->add_option("--train-fraction", fraction, "Fraction of training conversations")->check(CLI::Range(0.0, 1.0));
  trainc->add_option("--seed", seed, "Override the config seed");
  trainc->add_option("--runs", runs, "Independent runs to average")->check(CLI::PositiveNumber);
  trainc->add_option("--out", out_path, "Output directory");

  std::string checkpoint, corpus_path, report_path;
  std::size_t threads = 1;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a labeled corpus");
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  eval->add_option("corpus", corpus_path, "Labeled corpus JSONL")->required();
  eval->add_option("--taxonomy", taxonomy_name, "Taxonomy name or JSON file (default: from checkpoint)");
  eval->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  eval->add_option("--out", report_path, "Also write the JSON report here");
  eval->add_flag("--json", json, "JSON output");

  std::size_t turn = 0;
  auto* predict = app.add_subcommand("predict", "Per-turn predictions for conversations in a JSONL file");
  predict->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  predict->add_option("input", corpus_path, "Conversation JSONL (labels optional)")->required();
  predict->add_option("--turn", turn, "1-based turn to predict (default: all)")->check(CLI::PositiveNumber);
  predict->add_flag("--json", json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto logger = spdlog::get("compm");
  if (!logger) logger = spdlog::stderr_color_mt("compm");
  spdlog::set_default_logger(logger);
  spdlog::set_level(quiet ? spdlog::level::warn : verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*stats) {
      std::vector<std::pair<std::string, fs::path>> splits;
      for (const auto& s : stats_inputs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
          splits.emplace_back(fs::path(s).stem().string(), s);
        } else {
          splits.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
      }
      std::optional<data::LabelTaxonomy> taxonomy;
      if (!taxonomy_name.empty()) taxonomy = resolve_taxonomy(taxonomy_name);
      return cmd_stats(splits, taxonomy, json, out);
    }
    if (*pretrain) {
      auto config = load_run_config(config_path);
      if (pretrain->count("--seed")) config.seed = seed;
      const fs::path dir = out_path.empty() ? config.output_dir / (timestamp() + "-pretrain") : fs::path(out_path);
      return cmd_pretrain(config, dir, out);
    }
    if (*trainc) {
      auto config = load_run_config(config_path);
      TrainOverrides o;
      if (!variant.empty()) o.variant = model::parse_variant(variant);
      if (trainc->count("--train-fraction")) o.train_fraction = fraction;
      if (trainc->count("--seed")) o.seed = seed;
      if (trainc->count("--runs")) o.runs = runs;
      if (!out_path.empty()) o.out = out_path;
      return cmd_train(std::move(config), o, out);
    }
    if (*eval) {
      return cmd_eval(checkpoint, corpus_path,
                      taxonomy_name.empty() ? std::nullopt : std::optional<std::string>(taxonomy_name), threads, json,
                      report_path.empty() ? std::nullopt : std::optional<fs::path>(report_path), out);
    }
    if (*predict) {
      return cmd_predict(checkpoint, corpus_path, turn ? std::optional<std::size_t>(turn) : std::nullopt, json, out);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace compm::app

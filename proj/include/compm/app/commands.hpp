#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "compm/app/run_config.hpp"
#include "compm/data/corpus.hpp"

namespace compm::app {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

/// Maps a caught exception to an exit code: config/argument errors 1, input data
/// errors 2, numeric failures 3.
int exit_code_for(const std::exception& e);

struct SplitStats {
  std::string name;
  std::size_t dialogues = 0;
  std::size_t utterances = 0;
  std::size_t unlabeled = 0;
  double average_turns = 0.0;
  std::map<std::string, std::size_t> classes;
  std::map<std::size_t, std::size_t> participants;  // participant count -> dialogues
};

SplitStats corpus_stats(const std::string& name, const std::vector<data::Conversation>& corpus);
std::string format_stats(const std::vector<SplitStats>& splits);
nlohmann::json stats_to_json(const std::vector<SplitStats>& splits);

/// One named corpus file per split. An empty file gives a zero row and a warning.
int cmd_stats(const std::vector<std::pair<std::string, std::filesystem::path>>& splits,
              const std::optional<data::LabelTaxonomy>& taxonomy, bool json, std::ostream& out);

/// Masked-token pretraining of the memory encoder. Writes pretrained.ckpt, vocab.txt,
/// and pretrain_record.json under `out_dir`.
int cmd_pretrain(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& out);

struct TrainOverrides {
  std::optional<model::VariantMode> variant;
  std::optional<double> train_fraction;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::filesystem::path> out;
};

/// Applies overrides, validates, then trains `runs` models (seed, seed + 1, ...).
/// Layout: <out>/config.json, vocab.txt, run_record.json, run<i>/best.ckpt, run<i>/run_record.json.
/// The default <out> is <output_dir>/<timestamp>-<variant>.
int cmd_train(RunConfig config, const TrainOverrides& overrides, std::ostream& out);

/// Taxonomy defaults to the one stored in the checkpoint.
int cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& corpus,
             const std::optional<std::string>& taxonomy, std::size_t threads, bool json,
             const std::optional<std::filesystem::path>& report_path, std::ostream& out);

/// Per-turn predicted label and class probabilities. `turn` is 1-based; all turns by default.
int cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                std::optional<std::size_t> turn, bool json, std::ostream& out);

/// Full command-line entry point.
int run_cli(int argc, char** argv, std::ostream& out);

}  // namespace compm::app

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "compm/data/taxonomy.hpp"

namespace compm::data {

struct Utterance {
  long long turn = 0;
  std::string speaker;
  std::string text;
  std::optional<std::string> label;

  bool operator==(const Utterance&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;  // ascending turn order

  std::size_t size() const { return utterances.size(); }
  /// Distinct speakers in order of first appearance.
  std::vector<std::string> participants() const;

  bool operator==(const Conversation&) const = default;
};

/// Parses JSONL: one {"conv_id", "turn", "speaker", "text", "label"} object per line.
///
/// Conversations keep the order in which their ids first appear; turns are sorted.
/// `label` may be absent or null (inference input). When `taxonomy` is given every
/// present label must belong to it. Errors carry 1-based line numbers.
std::vector<Conversation> parse_corpus(const std::string& jsonl, const LabelTaxonomy* taxonomy = nullptr);
std::vector<Conversation> load_corpus(const std::filesystem::path& path, const LabelTaxonomy* taxonomy = nullptr);

std::string serialize_corpus(const std::vector<Conversation>& conversations);
void save_corpus(const std::filesystem::path& path, const std::vector<Conversation>& conversations);

/// Replaces every label by its group (e.g. EmoryNLP emotion -> sentiment).
std::vector<Conversation> regroup_labels(std::vector<Conversation> conversations, const LabelTaxonomy& taxonomy);

/// Deterministic conversation-level sample of ceil(fraction * N) conversations, kept in
/// their original order. Throws ArgumentError unless 0 < fraction <= 1.
std::vector<Conversation> subsample_training(const std::vector<Conversation>& conversations, double fraction,
                                             std::uint64_t seed);

/// Every utterance text in corpus order.
std::vector<std::string> utterance_texts(const std::vector<Conversation>& conversations);

}  // namespace compm::data

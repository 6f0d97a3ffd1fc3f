#include "compm/data/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "compm/data/tokenizer.hpp"
#include "compm/errors.hpp"
#include "compm/util/atomic_file.hpp"
#include "json.hpp"

namespace compm::data {

std::vector<std::string> Conversation::participants() const {
  std::vector<std::string> out;
  for (const auto& u : utterances)
    if (std::find(out.begin(), out.end(), u.speaker) == out.end()) out.push_back(u.speaker);
  return out;
}

namespace {

std::string id_string(const nlohmann::json& value, std::size_t line) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  throw FormatError("conv_id must be a string or an integer", line);
}

}  // namespace

std::vector<Conversation> parse_corpus(const std::string& jsonl, const LabelTaxonomy* taxonomy) {
  std::vector<Conversation> conversations;
  std::unordered_map<std::string, std::size_t> by_id;
  std::map<std::pair<std::string, long long>, std::size_t> seen_turns;

  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (normalize(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("line " + std::to_string(line_no) + ": invalid JSON (" + e.what() + ")", line_no);
    }
    if (!obj.is_object()) throw FormatError("line " + std::to_string(line_no) + ": expected a JSON object", line_no);
    for (const char* field : {"conv_id", "turn", "speaker", "text"}) {
      if (!obj.contains(field)) {
        throw FormatError("line " + std::to_string(line_no) + ": missing field '" + field + "'", line_no);
      }
    }
    Utterance u;
    const std::string conv_id = id_string(obj["conv_id"], line_no);
    try {
      u.turn = obj["turn"].get<long long>();
      u.speaker = obj["speaker"].is_string() ? obj["speaker"].get<std::string>() : obj["speaker"].dump();
      u.text = obj["text"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (normalize(u.text).empty()) {
      throw FormatError("line " + std::to_string(line_no) + ": utterance text is empty", line_no);
    }
    if (obj.contains("label") && !obj["label"].is_null()) {
      if (!obj["label"].is_string()) throw FormatError("line " + std::to_string(line_no) + ": label must be a string", line_no);
      u.label = obj["label"].get<std::string>();
      if (taxonomy) {
        try {
          taxonomy->index_of(*u.label);
        } catch (const TaxonomyError& e) {
          throw TaxonomyError("line " + std::to_string(line_no) + ": " + e.what());
        }
      }
    }
    const auto key = std::make_pair(conv_id, u.turn);
    if (const auto it = seen_turns.find(key); it != seen_turns.end()) {
      throw FormatError("line " + std::to_string(line_no) + ": duplicate turn " + std::to_string(u.turn) +
                            " of conversation '" + conv_id + "' (first seen on line " + std::to_string(it->second) + ")",
                        line_no);
    }
    seen_turns.emplace(key, line_no);
    auto [it, inserted] = by_id.emplace(conv_id, conversations.size());
    if (inserted) conversations.push_back(Conversation{conv_id, {}});
    conversations[it->second].utterances.push_back(std::move(u));
  }

  for (auto& conv : conversations) {
    std::stable_sort(conv.utterances.begin(), conv.utterances.end(),
                     [](const Utterance& a, const Utterance& b) { return a.turn < b.turn; });
    if (conv.participants().size() < 2) {
      spdlog::warn("conversation '{}' has fewer than two participants; accepted", conv.id);
    }
  }
  return conversations;
}

std::vector<Conversation> load_corpus(const std::filesystem::path& path, const LabelTaxonomy* taxonomy) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
  return parse_corpus(text, taxonomy);
}

std::string serialize_corpus(const std::vector<Conversation>& conversations) {
  std::string out;
  for (const auto& conv : conversations) {
    for (const auto& u : conv.utterances) {
      nlohmann::json obj{{"conv_id", conv.id}, {"turn", u.turn}, {"speaker", u.speaker}, {"text", u.text}};
      obj["label"] = u.label ? nlohmann::json(*u.label) : nlohmann::json(nullptr);
      out += obj.dump() + "\n";
    }
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const std::vector<Conversation>& conversations) {
  write_file_atomic(path, serialize_corpus(conversations));
}

std::vector<Conversation> regroup_labels(std::vector<Conversation> conversations, const LabelTaxonomy& taxonomy) {
  for (auto& conv : conversations)
    for (auto& u : conv.utterances)
      if (u.label) u.label = map_to_sentiment(taxonomy, *u.label);
  return conversations;
}

std::vector<Conversation> subsample_training(const std::vector<Conversation>& conversations, double fraction,
                                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ArgumentError("train fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const std::size_t n = conversations.size();
  // Guard against 0.6 * 10 landing a hair above 6 in floating point.
  const auto keep = std::min(n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  if (keep == n) return conversations;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 engine(seed);
  std::shuffle(order.begin(), order.end(), engine);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  std::vector<Conversation> out;
  out.reserve(keep);
  for (auto i : order) out.push_back(conversations[i]);
  return out;
}

std::vector<std::string> utterance_texts(const std::vector<Conversation>& conversations) {
  std::vector<std::string> out;
  for (const auto& conv : conversations)
    for (const auto& u : conv.utterances) out.push_back(u.text);
  return out;
}

}  // namespace compm::data

#include "compm/data/vocabulary.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "compm/data/tokenizer.hpp"
#include "compm/errors.hpp"
#include "compm/util/atomic_file.hpp"

namespace compm::data {

namespace {
constexpr std::string_view kHeaderPrefix = "#compm-vocab v1 speakers=";
}

std::string speaker_token(std::size_t slot) { return "<s_" + std::to_string(slot + 1) + ">"; }

Vocabulary::Vocabulary(std::size_t speaker_pool) : speaker_pool_(speaker_pool) {
  if (speaker_pool == 0) throw ArgumentError("speaker pool must hold at least one token");
  for (auto t : {kPadToken, kUnkToken, kClsToken, kMaskToken}) add(std::string(t));
  for (std::size_t s = 0; s < speaker_pool; ++s) add(speaker_token(s));
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, std::size_t speaker_pool, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts)
    for (auto& token : segment(text)) ++counts[token];
  std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab(speaker_pool);
  for (const auto& [token, count] : ordered)
    if (count >= min_count) vocab.add(token);
  return vocab;
}

TokenId Vocabulary::speaker_id(std::size_t slot) const {
  if (slot >= speaker_pool_) {
    throw CapacityError("speaker slot " + std::to_string(slot + 1) + " exceeds the pool of " +
                        std::to_string(speaker_pool_) + " speaker tokens; raise the speaker pool size");
  }
  return 4 + slot;
}

TokenId Vocabulary::id_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_id() : it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  if (id >= tokens_.size()) throw ArgumentError("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[id];
}

TokenId Vocabulary::add(const std::string& token) {
  if (token.empty() || token.find_first_of("\r\n") != std::string::npos) {
    throw ArgumentError("vocabulary tokens must be non-empty single-line strings");
  }
  const auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& token : segment(text)) ids.push_back(id_of(token));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<TokenId>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(token_of(id));
  return out;
}

std::string Vocabulary::serialize() const {
  std::string out(kHeaderPrefix);
  out += std::to_string(speaker_pool_) + "\n";
  for (const auto& t : tokens_) out += t + "\n";
  return out;
}

Vocabulary Vocabulary::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || !line.starts_with(kHeaderPrefix)) {
    throw FormatError("vocabulary header missing (expected '" + std::string(kHeaderPrefix) + "K')", 1);
  }
  std::size_t pool = 0;
  try {
    pool = std::stoul(line.substr(kHeaderPrefix.size()));
  } catch (const std::exception&) {
    throw FormatError("vocabulary header has an invalid speaker count", 1);
  }
  Vocabulary vocab(pool);
  std::size_t line_no = 1;
  std::size_t id = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (id < vocab.tokens_.size()) {
      if (line != vocab.tokens_[id]) {
        throw FormatError("reserved id " + std::to_string(id) + " must be '" + vocab.tokens_[id] + "', found '" +
                              line + "'",
                          line_no);
      }
    } else {
      if (vocab.index_.count(line)) throw FormatError("duplicate token '" + line + "'", line_no);
      vocab.add(line);
    }
    ++id;
  }
  if (id < vocab.reserved_count()) throw FormatError("vocabulary ends inside the reserved block", line_no);
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return parse(read_file(path)); }

}  // namespace compm::data

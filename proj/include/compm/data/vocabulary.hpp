#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace compm::data {

using TokenId = std::size_t;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kClsToken = "<cls>";
inline constexpr std::string_view kMaskToken = "<mask>";
inline constexpr std::size_t kDefaultSpeakerPool = 9;

/// Token <-> id map. Ids 0..3 are <pad>, <unk>, <cls>, <mask>; ids 4..4+K-1 are the
/// speaker tokens <s_1>..<s_K>; words follow.
///
/// File format: a header line "#compm-vocab v1 speakers=K", then one token per line
/// where the line index (0-based, after the header) is the id.
class Vocabulary {
 public:
  explicit Vocabulary(std::size_t speaker_pool = kDefaultSpeakerPool);

  /// Words from `texts` ordered by descending frequency then lexicographically.
  static Vocabulary build(const std::vector<std::string>& texts, std::size_t speaker_pool = kDefaultSpeakerPool,
                          std::size_t min_count = 1);

  static constexpr TokenId pad_id() { return 0; }
  static constexpr TokenId unk_id() { return 1; }
  static constexpr TokenId cls_id() { return 2; }
  static constexpr TokenId mask_id() { return 3; }
  /// Id of <s_{slot+1}>; `slot` is 0-based.
  TokenId speaker_id(std::size_t slot) const;
  bool is_speaker(TokenId id) const { return id >= 4 && id < 4 + speaker_pool_; }
  bool is_reserved(TokenId id) const { return id < 4 + speaker_pool_; }
  std::size_t speaker_pool() const { return speaker_pool_; }
  std::size_t reserved_count() const { return 4 + speaker_pool_; }

  std::size_t size() const { return tokens_.size(); }
  TokenId id_of(std::string_view token) const;
  const std::string& token_of(TokenId id) const;
  TokenId add(const std::string& token);

  /// Segments `text` and maps every token to its id (<unk> when absent).
  std::vector<TokenId> tokenize(std::string_view text) const;
  std::vector<std::string> decode(const std::vector<TokenId>& ids) const;

  std::string serialize() const;
  static Vocabulary parse(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  const std::vector<std::string>& tokens() const { return tokens_; }
  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::size_t speaker_pool_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

std::string speaker_token(std::size_t slot);

}  // namespace compm::data

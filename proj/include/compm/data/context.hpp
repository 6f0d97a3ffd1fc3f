#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "compm/data/corpus.hpp"
#include "compm/data/taxonomy.hpp"
#include "compm/data/vocabulary.hpp"

namespace compm::data {

/// Speaker id -> 0-based slot of its speaker token (<s_{slot+1}>), assigned in order of
/// first appearance. Throws CapacityError when the conversation has more than
/// `speaker_pool` participants.
std::map<std::string, std::size_t> assign_speaker_tokens(const Conversation& conversation, std::size_t speaker_pool);

/// A conversation mapped to ids: per-turn tokens, speaker slots, and class indices.
struct EncodedConversation {
  std::string id;
  std::vector<std::vector<TokenId>> tokens;
  std::vector<std::size_t> speakers;             // speaker slot per turn
  std::vector<std::optional<std::size_t>> labels;

  std::size_t size() const { return tokens.size(); }
};

/// Tokenizes and assigns speaker slots. Labels are mapped through `taxonomy` when given.
EncodedConversation encode_conversation(const Vocabulary& vocab, const Conversation& conversation,
                                        const LabelTaxonomy* taxonomy = nullptr);
std::vector<EncodedConversation> encode_corpus(const Vocabulary& vocab, const std::vector<Conversation>& corpus,
                                               const LabelTaxonomy* taxonomy = nullptr);

struct AssembledContext {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;  // all ones; padding is added by batching code
  std::size_t first_turn = 0;      // earliest turn kept after truncation
  bool current_truncated = false;  // turn t alone did not fit and lost leading tokens
};

/// <cls> <s(u_1)> u_1 ... <s(u_t)> u_t for 0-based turn `turn`.
///
/// When the sequence exceeds `max_len`, whole turns are dropped from the front; <cls>
/// and turn `turn` are always kept. If turn `turn` alone does not fit, its leading
/// tokens are dropped and a warning is logged.
AssembledContext assemble_context(const Vocabulary& vocab, const EncodedConversation& conversation, std::size_t turn,
                                  std::size_t max_len);
AssembledContext assemble_context(const Vocabulary& vocab, const Conversation& conversation, std::size_t turn,
                                  std::size_t max_len);

/// <cls> u_i, keeping the leading tokens when longer than `max_len`.
std::vector<TokenId> utterance_input(const std::vector<TokenId>& utterance, std::size_t max_len);

}  // namespace compm::data

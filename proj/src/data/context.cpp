#include "compm/data/context.hpp"

#include <spdlog/spdlog.h>

#include "compm/errors.hpp"

namespace compm::data {

std::map<std::string, std::size_t> assign_speaker_tokens(const Conversation& conversation, std::size_t speaker_pool) {
  std::map<std::string, std::size_t> slots;
  for (const auto& speaker : conversation.participants()) {
    if (slots.size() == speaker_pool) {
      throw CapacityError("conversation '" + conversation.id + "' has more than " + std::to_string(speaker_pool) +
                          " participants; raise the speaker pool size");
    }
    slots.emplace(speaker, slots.size());
  }
  return slots;
}

EncodedConversation encode_conversation(const Vocabulary& vocab, const Conversation& conversation,
                                        const LabelTaxonomy* taxonomy) {
  const auto slots = assign_speaker_tokens(conversation, vocab.speaker_pool());
  EncodedConversation out;
  out.id = conversation.id;
  for (const auto& u : conversation.utterances) {
    auto ids = vocab.tokenize(u.text);
    if (ids.empty()) throw FormatError("conversation '" + conversation.id + "' has an empty utterance");
    out.tokens.push_back(std::move(ids));
    out.speakers.push_back(slots.at(u.speaker));
    if (u.label && taxonomy) {
      out.labels.emplace_back(taxonomy->index_of(*u.label));
    } else {
      out.labels.emplace_back(std::nullopt);
    }
  }
  return out;
}

std::vector<EncodedConversation> encode_corpus(const Vocabulary& vocab, const std::vector<Conversation>& corpus,
                                               const LabelTaxonomy* taxonomy) {
  std::vector<EncodedConversation> out;
  out.reserve(corpus.size());
  for (const auto& conv : corpus) out.push_back(encode_conversation(vocab, conv, taxonomy));
  return out;
}

AssembledContext assemble_context(const Vocabulary& vocab, const EncodedConversation& conversation, std::size_t turn,
                                  std::size_t max_len) {
  if (turn >= conversation.size()) {
    throw ArgumentError("turn " + std::to_string(turn) + " outside conversation of " +
                        std::to_string(conversation.size()) + " turns");
  }
  if (max_len < 3) throw ArgumentError("context length limit must be at least 3");

  AssembledContext out;
  // Earliest turn whose inclusion keeps the sequence within max_len.
  std::size_t length = 1 + 1 + conversation.tokens[turn].size();
  std::size_t first = turn;
  while (first > 0 && length + 1 + conversation.tokens[first - 1].size() <= max_len) {
    --first;
    length += 1 + conversation.tokens[first].size();
  }
  out.first_turn = first;
  out.ids.reserve(std::min(length, max_len));
  out.ids.push_back(Vocabulary::cls_id());
  for (std::size_t i = first; i <= turn; ++i) {
    out.ids.push_back(vocab.speaker_id(conversation.speakers[i]));
    const auto& toks = conversation.tokens[i];
    if (i == turn && 2 + toks.size() > max_len) {
      out.current_truncated = true;
      spdlog::warn("turn {} of conversation '{}' has {} tokens and was cut to the last {}", turn + 1, conversation.id,
                   toks.size(), max_len - 2);
      out.ids.insert(out.ids.end(), toks.end() - static_cast<std::ptrdiff_t>(max_len - 2), toks.end());
    } else {
      out.ids.insert(out.ids.end(), toks.begin(), toks.end());
    }
  }
  out.mask.assign(out.ids.size(), 1);
  return out;
}

AssembledContext assemble_context(const Vocabulary& vocab, const Conversation& conversation, std::size_t turn,
                                  std::size_t max_len) {
  return assemble_context(vocab, encode_conversation(vocab, conversation), turn, max_len);
}

std::vector<TokenId> utterance_input(const std::vector<TokenId>& utterance, std::size_t max_len) {
  if (max_len < 2) throw ArgumentError("utterance length limit must be at least 2");
  std::vector<TokenId> ids{Vocabulary::cls_id()};
  const std::size_t keep = std::min(utterance.size(), max_len - 1);
  ids.insert(ids.end(), utterance.begin(), utterance.begin() + static_cast<std::ptrdiff_t>(keep));
  return ids;
}

}  // namespace compm::data

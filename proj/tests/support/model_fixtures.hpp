#pragma once

#include <string>
#include <vector>

#include "compm/model/compm_model.hpp"

namespace compm::test {

inline data::Vocabulary make_vocab(std::size_t words = 12) {
  data::Vocabulary v;
  for (std::size_t i = 0; i < words; ++i) v.add("w" + std::to_string(i));
  return v;
}

inline nn::EncoderConfig encoder(std::size_t hidden, std::size_t heads = 2, std::size_t layers = 1) {
  nn::EncoderConfig c;
  c.hidden_dim = hidden;
  c.num_heads = heads;
  c.num_layers = layers;
  c.ffn_dim = 2 * hidden;
  c.max_positions = 64;
  c.dropout_rate = 0.1;
  return c;
}

inline model::ModelConfig model_config(model::VariantMode variant, std::size_t h_c = 8, std::size_t h_k = 8, std::size_t classes = 7) {
  model::ModelConfig c;
  c.context = encoder(h_c);
  c.memory = encoder(h_k);
  c.num_classes = classes;
  c.variant = variant;
  return c;
}

/// Random conversation over `speakers`, each utterance 1..4 word tokens.
inline data::EncodedConversation make_conversation(const data::Vocabulary& vocab, const std::vector<std::size_t>& speakers, Rng& rng) {
  data::EncodedConversation conv;
  conv.id = "c";
  conv.speakers = speakers;
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    std::vector<nn::TokenId> tokens(1 + rng.next() % 4);
    for (auto& t : tokens) t = vocab.reserved_count() + rng.next() % (vocab.size() - vocab.reserved_count());
    conv.tokens.push_back(tokens);
    conv.labels.push_back(i % 3);
  }
  return conv;
}

inline void randomize(const nn::ParameterList& params, Rng& rng, double stddev) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    for (auto& v : t.mutable_data()) v = rng.normal(0.0, stddev);
  }
}

}  // namespace compm::test

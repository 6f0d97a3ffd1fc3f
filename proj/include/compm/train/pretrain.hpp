#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "compm/data/vocabulary.hpp"
#include "compm/nn/checkpoint.hpp"
#include "compm/nn/encoder.hpp"
#include "compm/train/optimizer.hpp"

namespace compm::train {

using nn::TokenId;

struct PretrainConfig {
  nn::EncoderConfig encoder;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double warmup_fraction = 0.1;
  double mask_rate = 0.15;
  double max_grad_norm = 10.0;
  AdamWConfig adamw;
  std::uint64_t seed = 42;

  void validate() const;
};

struct MaskedInput {
  std::vector<TokenId> ids;         // <cls> u with some tokens replaced by <mask>
  std::vector<std::size_t> positions;
  std::vector<std::size_t> targets;  // original ids at `positions`
};

/// Replaces each utterance token (never <cls>) with <mask> at probability `rate`;
/// at least one token is always masked. `input` must start with <cls>.
MaskedInput mask_tokens(const std::vector<TokenId>& input, double rate, Rng& rng);

/// Encoder plus an untied output layer trained to recover masked tokens.
struct PretrainResult {
  nn::TransformerEncoder encoder;
  nn::Linear head;
  std::vector<double> epoch_losses;

  /// encoder.* and mlm_head.* arrays.
  nn::ParameterList parameters() const;
  /// {"format": "compm-pretrained-encoder", "encoder": config, "vocab": ..., "epoch_losses": ...}
  nlohmann::json header(const data::Vocabulary& vocab) const;
  void save(const std::filesystem::path& path, const data::Vocabulary& vocab,
            nn::StorageType storage = nn::StorageType::Float32) const;
};

/// Masked-token training over bare utterances (<cls> u, leading tokens kept).
/// Masks are redrawn every epoch. Throws ArgumentError on an empty corpus.
PretrainResult pretrain_memory_encoder(const data::Vocabulary& vocab,
                                       const std::vector<std::vector<TokenId>>& utterances,
                                       const PretrainConfig& config);

/// Loads an encoder from a pretrained checkpoint; the vocabulary in its header is checked.
nn::TransformerEncoder load_pretrained_encoder(const nn::Checkpoint& checkpoint, const data::Vocabulary& vocab);

}  // namespace compm::train

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "compm/data/context.hpp"
#include "compm/data/vocabulary.hpp"
#include "compm/model/variant.hpp"
#include "compm/nn/checkpoint.hpp"
#include "compm/nn/encoder.hpp"
#include "compm/nn/gru.hpp"

namespace compm::model {

using nn::ForwardContext;
using nn::TokenId;

struct Prediction {
  Tensor logits;                     // [1 x classes]
  std::vector<double> probabilities;
  std::size_t predicted = 0;
};

struct ForwardTrace {
  std::size_t turn = 0;              // 0-based target turn
  Tensor context;                    // c_t [1 x h_c]; undefined for PM_only
  std::vector<std::size_t> memory_turns;
  std::vector<Tensor> memories;      // k_i [1 x h_k], in turn order
  Tensor tracked;                    // kt_t [1 x h_k]; undefined unless tracking is active
  Tensor fused;                      // o_t, the head input
  Tensor logits;
  std::vector<double> probabilities;
  std::size_t predicted = 0;
};

/// Context encoder + speaker memory encoder + GRU tracker + classification head.
///
/// All turn indices are 0-based. The vocabulary is owned by the model because the
/// embedding tables are bound to it.
class CompmModel {
 public:
  CompmModel(ModelConfig config, data::Vocabulary vocab, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  VariantMode variant() const { return config_.variant; }
  const data::Vocabulary& vocabulary() const { return vocab_; }
  std::size_t num_classes() const { return config_.num_classes; }

  /// c_t from an assembled context. ids[0] must be <cls>.
  Tensor encode_context(std::span<const TokenId> ids, const nn::AttentionMask& mask,
                        const ForwardContext& ctx = ForwardContext::eval()) const;
  /// k_i: <cls> vector of the memory encoder applied to the bare utterance.
  Tensor encode_memory(const std::vector<TokenId>& utterance, const ForwardContext& ctx = ForwardContext::eval()) const;

  /// Prior turns spoken by the speaker of `turn`, ascending.
  static std::vector<std::size_t> memory_turns(const data::EncodedConversation& conversation, std::size_t turn);
  std::vector<Tensor> extract_memories(const data::EncodedConversation& conversation, std::size_t turn,
                                       const ForwardContext& ctx = ForwardContext::eval()) const;

  /// kt_t. An empty sequence gives exact zeros of width h_k without touching the GRU.
  Tensor track(const std::vector<Tensor>& memories, const ForwardContext& ctx = ForwardContext::eval()) const;
  /// o_t = c_t + W_p kt_t, or c_t + kt_t when the encoders share a backbone.
  Tensor fuse(const Tensor& context, const Tensor& tracked) const;
  /// Softmax over W_o o_t; ties resolve to the lowest class index.
  Prediction predict(const Tensor& fused) const;

  ForwardTrace forward(const data::EncodedConversation& conversation, std::size_t turn,
                       const ForwardContext& ctx = ForwardContext::eval()) const;
  /// Several targets of one conversation. Memory vectors are computed once and shared.
  std::vector<ForwardTrace> forward_turns(const data::EncodedConversation& conversation,
                                          std::span<const std::size_t> turns,
                                          const ForwardContext& ctx = ForwardContext::eval()) const;

  /// Head applied to c_t alone (the path CoM_only takes). Requires the context encoder.
  Tensor context_only_logits(const data::EncodedConversation& conversation, std::size_t turn,
                             const ForwardContext& ctx = ForwardContext::eval()) const;

  /// Every parameter, names prefixed com. / pm. / tracker. / w_p. / w_o.
  nn::ParameterList parameters() const;
  /// Parameters the optimizer may update. Excludes the memory encoder when it is frozen.
  nn::ParameterList trainable_parameters() const;

  const nn::TransformerEncoder* context_encoder() const { return com_ ? &*com_ : nullptr; }
  const nn::TransformerEncoder* memory_encoder() const { return pm_ ? &*pm_ : nullptr; }
  const nn::GruTracker* tracker() const { return tracker_ ? &*tracker_ : nullptr; }
  const nn::Linear* projection() const { return w_p_ ? &*w_p_ : nullptr; }
  const nn::Linear& head() const { return w_o_; }

  /// Copies a pretrained encoder (arrays named encoder.*) into the memory encoder.
  /// Returns false without loading when the variant trains PM from scratch or has no PM.
  /// Throws ConfigError when the checkpoint vocabulary differs from the model's.
  bool load_pretrained_memory(const nn::Checkpoint& pretrained);
  /// Same source, copied into the context encoder. Returns false when there is none.
  bool load_pretrained_context(const nn::Checkpoint& pretrained);

  /// Checkpoint header: {"format":"compm-model", "model": config, "vocab": ...} merged with `extra`.
  nlohmann::json checkpoint_header(const nlohmann::json& extra = nlohmann::json::object()) const;
  void save(const std::filesystem::path& path, const nlohmann::json& extra = nlohmann::json::object(),
            nn::StorageType storage = nn::StorageType::Float32) const;
  static CompmModel load(const std::filesystem::path& path);
  static CompmModel from_checkpoint(const nn::Checkpoint& checkpoint);

 private:
  void check_vocabulary(const nn::Checkpoint& pretrained) const;
  Tensor track_checked(const std::vector<Tensor>& memories, const ForwardContext& ctx) const;

  ModelConfig config_;
  data::Vocabulary vocab_;
  std::optional<nn::TransformerEncoder> com_;
  std::optional<nn::TransformerEncoder> pm_;
  std::optional<nn::GruTracker> tracker_;
  std::optional<nn::Linear> w_p_;
  nn::Linear w_o_;
};

/// Vocabulary stored in a checkpoint header ({"speaker_pool", "tokens"}).
nlohmann::json vocabulary_to_json(const data::Vocabulary& vocab);
data::Vocabulary vocabulary_from_json(const nlohmann::json& j);

}  // namespace compm::model

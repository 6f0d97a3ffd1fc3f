#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "compm/nn/config.hpp"
#include "compm/nn/layers.hpp"

namespace compm::nn {

using TokenId = std::size_t;

/// Per-position keep flag. Ignored positions receive no attention weight.
struct AttentionMask {
  std::vector<std::uint8_t> keep;

  static AttentionMask all(std::size_t length) { return {std::vector<std::uint8_t>(length, 1)}; }
  /// `kept` attended positions followed by `padding` ignored ones.
  static AttentionMask with_padding(std::size_t kept, std::size_t padding);

  std::size_t size() const { return keep.size(); }
  std::size_t kept() const;
};

struct EncoderTrace {
  Tensor hidden;                                  // [seq x hidden]
  std::vector<std::vector<Tensor>> attention;     // [layer][head] -> [seq x seq]
};

/// Post-layer-norm transformer encoder with learned absolute positions.
///
/// embeddings: LN(token[id] + position[i]) -> dropout
/// each layer: x = LN(x + dropout(MHA(x)));  x = LN(x + dropout(W2 gelu(W1 x)))
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(EncoderConfig config, Rng& rng);

  /// Contextual embeddings [len x hidden]. Throws ContractError when the sequence is
  /// longer than max_positions or the mask does not fit.
  Tensor encode(std::span<const TokenId> ids, const AttentionMask& mask,
                const ForwardContext& ctx = ForwardContext::eval()) const;
  EncoderTrace encode_traced(std::span<const TokenId> ids, const AttentionMask& mask,
                             const ForwardContext& ctx = ForwardContext::eval()) const;

  const EncoderConfig& config() const { return config_; }
  void append_parameters(std::string_view prefix, ParameterList& out) const;

 private:
  struct Layer {
    Linear query, key, value, output;
    LayerNorm attention_norm;
    Linear ffn_in, ffn_out;
    LayerNorm ffn_norm;
  };

  EncoderTrace run(std::span<const TokenId> ids, const AttentionMask& mask, const ForwardContext& ctx,
                   bool keep_attention) const;

  EncoderConfig config_;
  Tensor token_embedding_;
  Tensor position_embedding_;
  LayerNorm embedding_norm_;
  std::vector<Layer> layers_;
};

/// Row 0 of an encoder output, shape [1 x hidden].
Tensor cls_vector(const Tensor& encoder_output);

}  // namespace compm::nn

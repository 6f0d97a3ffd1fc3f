#include "compm/nn/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "compm/errors.hpp"
#include "compm/nn/init.hpp"

namespace compm::nn {

namespace {
constexpr double kMaskedScore = -1e30;
}

AttentionMask AttentionMask::with_padding(std::size_t kept, std::size_t padding) {
  AttentionMask mask = all(kept + padding);
  std::fill(mask.keep.begin() + static_cast<std::ptrdiff_t>(kept), mask.keep.end(), 0);
  return mask;
}

std::size_t AttentionMask::kept() const { return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), 1)); }

TransformerEncoder::TransformerEncoder(EncoderConfig config, Rng& rng) : config_(std::move(config)) {
  config_.validate();
  const auto h = config_.hidden_dim;
  token_embedding_ = truncated_normal({config_.vocab_size, h}, rng);
  position_embedding_ = truncated_normal({config_.max_positions, h}, rng);
  embedding_norm_ = LayerNorm(h);
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    Layer layer{Linear(h, h, true, rng), Linear(h, h, true, rng), Linear(h, h, true, rng), Linear(h, h, true, rng),
                LayerNorm(h), Linear(h, config_.ffn_dim, true, rng), Linear(config_.ffn_dim, h, true, rng),
                LayerNorm(h)};
    layers_.push_back(std::move(layer));
  }
}

Tensor TransformerEncoder::encode(std::span<const TokenId> ids, const AttentionMask& mask,
                                  const ForwardContext& ctx) const {
  return run(ids, mask, ctx, false).hidden;
}

EncoderTrace TransformerEncoder::encode_traced(std::span<const TokenId> ids, const AttentionMask& mask,
                                               const ForwardContext& ctx) const {
  return run(ids, mask, ctx, true);
}

EncoderTrace TransformerEncoder::run(std::span<const TokenId> ids, const AttentionMask& mask,
                                     const ForwardContext& ctx, bool keep_attention) const {
  const std::size_t len = ids.size();
  if (len == 0) throw ContractError("encoder input is empty");
  if (len > config_.max_positions) {
    throw ContractError("sequence of " + std::to_string(len) + " tokens exceeds max_positions " +
                        std::to_string(config_.max_positions) + "; truncate before encoding");
  }
  if (mask.size() != len) throw ContractError("attention mask length does not match the sequence");
  if (mask.kept() == 0) throw ContractError("attention mask keeps no position");

  std::vector<std::size_t> positions(len);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  Tensor x = add(embedding_lookup(token_embedding_, ids), embedding_lookup(position_embedding_, positions));
  x = ctx.dropout(embedding_norm_(x), config_.dropout_rate);

  Tensor mask_bias;
  if (mask.kept() != len) {
    std::vector<double> bias(len * len, 0.0);
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < len; ++j)
        if (!mask.keep[j]) bias[i * len + j] = kMaskedScore;
    mask_bias = Tensor::from({len, len}, std::move(bias));
  }

  const std::size_t heads = config_.num_heads;
  const std::size_t dh = config_.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  EncoderTrace trace;
  for (const auto& layer : layers_) {
    const Tensor q = layer.query(x);
    const Tensor k = layer.key(x);
    const Tensor v = layer.value(x);
    std::vector<Tensor> head_outputs;
    std::vector<Tensor> head_attention;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const Tensor qh = heads == 1 ? q : slice(q, 1, hd * dh, dh);
      const Tensor kh = heads == 1 ? k : slice(k, 1, hd * dh, dh);
      const Tensor vh = heads == 1 ? v : slice(v, 1, hd * dh, dh);
      Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
      if (mask_bias.defined()) scores = add(scores, mask_bias);
      const Tensor weights = softmax(scores, -1);
      if (keep_attention) head_attention.push_back(weights);
      head_outputs.push_back(matmul(weights, vh));
    }
    const Tensor attended = heads == 1 ? head_outputs.front() : concatenate(head_outputs, 1);
    x = layer.attention_norm(add(x, ctx.dropout(layer.output(attended), config_.dropout_rate)));
    const Tensor ffn = layer.ffn_out(gelu(layer.ffn_in(x)));
    x = layer.ffn_norm(add(x, ctx.dropout(ffn, config_.dropout_rate)));
    if (keep_attention) trace.attention.push_back(std::move(head_attention));
  }
  trace.hidden = x;
  return trace;
}

void TransformerEncoder::append_parameters(std::string_view prefix, ParameterList& out) const {
  const std::string p(prefix);
  out.push_back({p + ".token_embedding", token_embedding_});
  out.push_back({p + ".position_embedding", position_embedding_});
  embedding_norm_.append_parameters(p + ".embedding_norm", out);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const std::string lp = p + ".layer" + std::to_string(l);
    layer.query.append_parameters(lp + ".attention.query", out);
    layer.key.append_parameters(lp + ".attention.key", out);
    layer.value.append_parameters(lp + ".attention.value", out);
    layer.output.append_parameters(lp + ".attention.output", out);
    layer.attention_norm.append_parameters(lp + ".attention_norm", out);
    layer.ffn_in.append_parameters(lp + ".ffn.in", out);
    layer.ffn_out.append_parameters(lp + ".ffn.out", out);
    layer.ffn_norm.append_parameters(lp + ".ffn_norm", out);
  }
}

Tensor cls_vector(const Tensor& encoder_output) {
  if (!encoder_output.defined() || encoder_output.rank() != 2) {
    throw ContractError("cls_vector needs a [seq x hidden] encoder output");
  }
  return slice(encoder_output, 0, 0, 1);
}

}  // namespace compm::nn

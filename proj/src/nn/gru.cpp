#include "compm/nn/gru.hpp"

#include "compm/errors.hpp"
#include "compm/nn/init.hpp"

namespace compm::nn {

GruTracker::GruTracker(GruConfig config, Rng& rng) : config_(config) {
  config_.validate();
  const auto h = config_.hidden_dim;
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const auto in = l == 0 ? config_.input_dim : h;
    layers_.push_back({truncated_normal({3 * h, in}, rng), stacked_orthogonal(3, h, rng),
                       Tensor::zeros({3 * h}, true), Tensor::zeros({3 * h}, true)});
  }
}

Tensor GruTracker::forward(const Tensor& sequence, const ForwardContext& ctx) const {
  const Tensor outputs = forward_all(sequence, ctx);
  return slice(outputs, 0, outputs.rows() - 1, 1);
}

Tensor GruTracker::forward_all(const Tensor& sequence, const ForwardContext& ctx) const {
  if (!sequence.defined()) throw ContractError("GRU input is empty; the caller handles n = 0");
  if (sequence.rank() != 2 || sequence.cols() != config_.input_dim) {
    throw DimensionError("GRU expects [n x " + std::to_string(config_.input_dim) + "], got " +
                         shape_string(sequence.shape()));
  }
  const auto h = config_.hidden_dim;
  const auto steps = sequence.rows();
  Tensor layer_input = sequence;
  Tensor layer_output;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& w = layers_[l];
    const Tensor input_gates = linear(layer_input, w.weight_ih, w.bias_ih);  // [n x 3h]
    Tensor state = Tensor::zeros({1, h});
    std::vector<Tensor> states;
    states.reserve(steps);
    for (std::size_t s = 0; s < steps; ++s) {
      const Tensor gi = slice(input_gates, 0, s, 1);
      const Tensor gh = linear(state, w.weight_hh, w.bias_hh);
      const Tensor reset = sigmoid(add(slice(gi, 1, 0, h), slice(gh, 1, 0, h)));
      const Tensor update = sigmoid(add(slice(gi, 1, h, h), slice(gh, 1, h, h)));
      const Tensor candidate = tanh(add(slice(gi, 1, 2 * h, h), multiply(reset, slice(gh, 1, 2 * h, h))));
      state = add(candidate, multiply(update, sub(state, candidate)));
      states.push_back(state);
    }
    layer_output = steps == 1 ? states.front() : concatenate(states, 0);
    if (l + 1 < layers_.size()) layer_input = ctx.dropout(layer_output, config_.dropout_rate);
  }
  return layer_output;
}

void GruTracker::append_parameters(std::string_view prefix, ParameterList& out) const {
  const std::string p(prefix);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string lp = p + ".layer" + std::to_string(l);
    out.push_back({lp + ".weight_ih", layers_[l].weight_ih});
    out.push_back({lp + ".weight_hh", layers_[l].weight_hh});
    out.push_back({lp + ".bias_ih", layers_[l].bias_ih});
    out.push_back({lp + ".bias_hh", layers_[l].bias_hh});
  }
}

}  // namespace compm::nn

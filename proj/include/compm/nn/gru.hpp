#pragma once

#include <vector>

#include "compm/nn/config.hpp"
#include "compm/nn/layers.hpp"

namespace compm::nn {

/// Stacked unidirectional GRU started from a zero state.
///
/// Gate rows are ordered reset, update, candidate:
///   r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
///   z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
///   n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
///   h' = (1 - z) * n + z * h
/// Dropout is applied to the outputs of every layer except the top one, in training only.
class GruTracker {
 public:
  GruTracker() = default;
  GruTracker(GruConfig config, Rng& rng);

  /// Top-layer hidden state after the last step, shape [1 x hidden]. n = 0 is a ContractError.
  Tensor forward(const Tensor& sequence, const ForwardContext& ctx = ForwardContext::eval()) const;
  /// Top-layer hidden state after every step, shape [n x hidden].
  Tensor forward_all(const Tensor& sequence, const ForwardContext& ctx = ForwardContext::eval()) const;

  const GruConfig& config() const { return config_; }
  void append_parameters(std::string_view prefix, ParameterList& out) const;

  struct LayerWeights {
    Tensor weight_ih;  // [3h x in]
    Tensor weight_hh;  // [3h x h]
    Tensor bias_ih;    // [3h]
    Tensor bias_hh;    // [3h]
  };
  const std::vector<LayerWeights>& layers() const { return layers_; }

 private:
  GruConfig config_;
  std::vector<LayerWeights> layers_;
};

}  // namespace compm::nn

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "compm/tensor/ops.hpp"
#include "compm/tensor/rng.hpp"
#include "compm/tensor/tensor.hpp"

namespace compm::nn {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedTensor>;

/// Training flag and dropout source for one forward pass. The default is eval mode.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;

  static ForwardContext eval() { return {}; }
  static ForwardContext train(Rng& rng) { return {true, &rng}; }

  Tensor dropout(const Tensor& x, double p) const;
};

/// y = x W^T (+ b). Weight shape is [out x in].
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, bool with_bias, Rng& rng);

  Tensor operator()(const Tensor& x) const;

  std::size_t in_features() const { return weight_.cols(); }
  std::size_t out_features() const { return weight_.rows(); }
  bool has_bias() const { return bias_.defined(); }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

  void append_parameters(std::string_view prefix, ParameterList& out) const;

 private:
  Tensor weight_;
  Tensor bias_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t width);

  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain_, shift_, eps_); }
  void append_parameters(std::string_view prefix, ParameterList& out) const;

 private:
  Tensor gain_;
  Tensor shift_;
  double eps_ = 1e-5;
};

}  // namespace compm::nn

#include "compm/nn/layers.hpp"

#include "compm/errors.hpp"
#include "compm/nn/init.hpp"

namespace compm::nn {

Tensor ForwardContext::dropout(const Tensor& x, double p) const {
  if (!training || p == 0.0) return x;
  if (!rng) throw ContractError("training forward pass needs a random source for dropout");
  return compm::dropout(x, p, true, *rng);
}

Linear::Linear(std::size_t in_features, std::size_t out_features, bool with_bias, Rng& rng)
    : weight_(truncated_normal({out_features, in_features}, rng)) {
  if (with_bias) bias_ = Tensor::zeros({out_features}, true);
}

Tensor Linear::operator()(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != in_features()) {
    throw DimensionError("linear layer expects width " + std::to_string(in_features()) + ", got " +
                         shape_string(x.shape()));
  }
  return linear(x, weight_, bias_);
}

void Linear::append_parameters(std::string_view prefix, ParameterList& out) const {
  out.push_back({std::string(prefix) + ".weight", weight_});
  if (bias_.defined()) out.push_back({std::string(prefix) + ".bias", bias_});
}

LayerNorm::LayerNorm(std::size_t width)
    : gain_(Tensor::full({width}, 1.0, true)), shift_(Tensor::zeros({width}, true)) {}

void LayerNorm::append_parameters(std::string_view prefix, ParameterList& out) const {
  out.push_back({std::string(prefix) + ".gain", gain_});
  out.push_back({std::string(prefix) + ".shift", shift_});
}

}  // namespace compm::nn

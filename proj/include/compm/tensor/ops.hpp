#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "compm/tensor/rng.hpp"
#include "compm/tensor/tensor.hpp"

namespace compm {

// Elementwise arithmetic. Shapes must match exactly, except that either side
// may be a single-element tensor, which is broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

/// x[m x n] + bias[n] added to every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);

/// a[m x k] . b[k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// x[m x k] . weight[n x k]^T (+ bias[n] when defined)
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Exact (erf) form.
Tensor gelu(const Tensor& x);

/// Max-subtracted softmax along `axis` (negative counts from the end).
Tensor softmax(const Tensor& x, int axis = -1);

/// Normalizes each row of x[m x n], then applies gamma[n] and beta[n].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Rows of table[V x d] selected by ids, shape [len x d].
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);

/// Inverted dropout: kept units are scaled by 1/(1-p) in training; identity otherwise.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

/// Joins matrices along axis 0 (rows) or 1 (columns).
Tensor concatenate(const std::vector<Tensor>& parts, std::size_t axis);
/// `length` rows (axis 0) or columns (axis 1) starting at `start`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean negative log-likelihood of `labels` under softmax(logits[B x C]).
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace compm

#pragma once

#include <cstddef>

#include "compm/tensor/rng.hpp"
#include "compm/tensor/tensor.hpp"

namespace compm::nn {

inline constexpr double kInitStddev = 0.02;

/// Truncated normal (2 sigma) with sigma = 0.02.
Tensor truncated_normal(Shape shape, Rng& rng, double stddev = kInitStddev);

/// `blocks` stacked square orthogonal matrices, shape [blocks*n x n].
Tensor stacked_orthogonal(std::size_t blocks, std::size_t n, Rng& rng);

}  // namespace compm::nn

#include "compm/nn/init.hpp"

#include <cmath>
#include <vector>

namespace compm::nn {

Tensor truncated_normal(Shape shape, Rng& rng, double stddev) {
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = rng.truncated_normal(stddev);
  return Tensor::from(std::move(shape), std::move(values), true);
}

Tensor stacked_orthogonal(std::size_t blocks, std::size_t n, Rng& rng) {
  std::vector<double> values;
  values.reserve(blocks * n * n);
  for (std::size_t b = 0; b < blocks; ++b) {
    // Modified Gram-Schmidt on the rows of a Gaussian matrix.
    std::vector<double> m(n * n);
    for (auto& v : m) v = rng.normal(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* row = &m[i * n];
      for (std::size_t j = 0; j < i; ++j) {
        const double* prev = &m[j * n];
        double dot = 0.0;
        for (std::size_t k = 0; k < n; ++k) dot += row[k] * prev[k];
        for (std::size_t k = 0; k < n; ++k) row[k] -= dot * prev[k];
      }
      double norm = 0.0;
      for (std::size_t k = 0; k < n; ++k) norm += row[k] * row[k];
      norm = std::sqrt(norm);
      for (std::size_t k = 0; k < n; ++k) row[k] /= norm;
    }
    values.insert(values.end(), m.begin(), m.end());
  }
  return Tensor::from({blocks * n, n}, std::move(values), true);
}

}  // namespace compm::nn

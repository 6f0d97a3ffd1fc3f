#pragma once

#include <functional>
#include <string>
#include <vector>

#include "compm/tensor/tensor.hpp"

namespace compm {

struct GradCheckOptions {
  double step = 1e-5;
  /// Denominator floor for the relative error so exact zeros compare by absolute size.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<input index>[<flat element>]: analytic vs numeric"
};

/// Compares the backward sweep of `loss` against central finite differences for every
/// element of every tensor in `inputs`. `loss` must be deterministic; it is evaluated
/// once with recording and 2 x (number of elements) times without.
///
/// Relative error per element: |a - n| / max(|a|, |n|, floor).
GradCheckResult check_gradients(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                                GradCheckOptions options = {});

}  // namespace compm

#include "compm/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace compm {

GradCheckResult check_gradients(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                                GradCheckOptions options) {
  Tape::current().clear();
  for (auto& t : inputs) t.zero_grad();
  backward(loss());
  Tape::current().clear();

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& t = inputs[k];
    const std::vector<double> analytic = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                                      : std::vector<double>(t.size(), 0.0);
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + options.step;
      const double plus = loss().item();
      values[i] = original - options.step;
      const double minus = loss().item();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double rel_err = abs_err / std::max({std::abs(analytic[i]), std::abs(numeric), options.floor});
      ++result.checked;
      result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
      if (rel_err > result.max_relative_error) {
        result.max_relative_error = rel_err;
        std::ostringstream where;
        where << k << '[' << i << "]: " << analytic[i] << " vs " << numeric;
        result.worst = where.str();
      }
    }
  }
  return result;
}

}  // namespace compm

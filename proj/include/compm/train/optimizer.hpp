#pragma once

#include <cstddef>
#include <vector>

#include "compm/nn/layers.hpp"

namespace compm::train {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay:
///   p <- p * (1 - lr * wd)
///   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Parameters without a gradient are skipped, as are their step counters.
class AdamW {
 public:
  AdamW(nn::ParameterList params, AdamWConfig config = {});

  /// Throws NumericError naming the parameter when any gradient is non-finite; no
  /// parameter is modified in that case.
  void step(double lr);
  void zero_grad();

  const nn::ParameterList& parameters() const { return params_; }
  const AdamWConfig& config() const { return config_; }
  std::size_t step_count() const { return steps_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  nn::ParameterList params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::vector<std::size_t> param_steps_;
  std::size_t steps_ = 0;
};

/// Linear warmup from 0 to base_lr, then linear decay to 0 at total_steps.
struct ScheduleConfig {
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;
  double base_lr = 1e-5;

  /// warmup = round(fraction * total).
  static ScheduleConfig with_warmup_fraction(std::size_t total_steps, double fraction, double base_lr);
  void validate() const;
};

double lr_at(const ScheduleConfig& schedule, std::size_t step);

double global_grad_norm(const nn::ParameterList& params);
/// Rescales every gradient by max_norm / norm when the global L2 norm exceeds max_norm.
/// Returns the factor applied (1 when untouched).
double clip_gradients(const nn::ParameterList& params, double max_norm = 10.0);

}  // namespace compm::train

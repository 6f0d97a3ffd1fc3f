#include "compm/train/optimizer.hpp"

#include <cmath>

#include "compm/errors.hpp"

namespace compm::train {

AdamW::AdamW(nn::ParameterList params, AdamWConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
  param_steps_.assign(params_.size(), 0);
}

void AdamW::step(double lr) {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    const auto g = p.tensor.grad();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j])) {
        throw NumericError("non-finite gradient " + std::to_string(g[j]) + " in " + p.name + " at element " +
                           std::to_string(j));
      }
    }
  }
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor t = params_[i].tensor;
    if (!t.has_grad()) continue;
    const std::size_t s = ++param_steps_[i];
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(s));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(s));
    const auto g = t.grad();
    auto w = t.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] *= 1.0 - lr * config_.weight_decay;
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (const auto& p : params_) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

ScheduleConfig ScheduleConfig::with_warmup_fraction(std::size_t total_steps, double fraction, double base_lr) {
  ScheduleConfig s;
  s.total_steps = total_steps;
  s.warmup_steps = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total_steps)));
  s.base_lr = base_lr;
  s.validate();
  return s;
}

void ScheduleConfig::validate() const {
  if (warmup_steps > total_steps) throw ConfigError("warmup_steps exceeds total_steps");
  if (!(base_lr >= 0.0) || !std::isfinite(base_lr)) throw ConfigError("learning rate must be finite and non-negative");
}

double lr_at(const ScheduleConfig& s, std::size_t step) {
  if (step < s.warmup_steps) return s.base_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  if (step >= s.total_steps) return 0.0;
  return s.base_lr * static_cast<double>(s.total_steps - step) / static_cast<double>(s.total_steps - s.warmup_steps);
}

double global_grad_norm(const nn::ParameterList& params) {
  double total = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) total += g * g;
  }
  return std::sqrt(total);
}

double clip_gradients(const nn::ParameterList& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (!(norm > max_norm)) return 1.0;
  const double scale = max_norm / norm;
  for (const auto& p : params) {
    Tensor t = p.tensor;
    if (!t.has_grad()) continue;
    for (auto& g : t.mutable_grad()) g *= scale;
  }
  return scale;
}

}  // namespace compm::train

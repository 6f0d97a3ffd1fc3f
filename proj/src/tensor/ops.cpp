#include "compm/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "compm/errors.hpp"

namespace compm {

namespace {

using detail::Node;
using BackwardFn = std::function<void(Node&, BackwardContext&)>;

/// Builds the output tensor and records it when some input needs a gradient.
Tensor finish(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs, BackwardFn fn) {
  Tensor out = Tensor::from(std::move(shape), std::move(values));
  if (!Tape::recording()) return out;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || (in.defined() && in.requires_grad());
  if (!needs) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (const auto& in : inputs) node.inputs.push_back(in.node());
  node.backward = std::move(fn);
  Tape::current().record(out.node());
  return out;
}

bool wants(const Node* node) { return node && node->requires_grad; }

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(t.shape()));
  }
}

void require_finite(const Tensor& t, const char* op) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

enum class Broadcast { None, Left, Right };

Broadcast check_elementwise(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::None;
  if (a.size() == 1) return Broadcast::Left;
  if (b.size() == 1) return Broadcast::Right;
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
}

const Shape& result_shape(const Tensor& a, const Tensor& b, Broadcast mode) {
  return mode == Broadcast::Left ? b.shape() : a.shape();
}

/// Shared skeleton for a binary elementwise op with local partials da, db.
template <typename F, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, DA da, DB db) {
  const auto mode = check_elementwise(a, b, name);
  const auto& shape = result_shape(a, b, mode);
  const std::size_t n = shape_size(shape);
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t sa = mode == Broadcast::Left ? 0 : 1;
  const std::size_t sb = mode == Broadcast::Right ? 0 : 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i * sa], bv[i * sb]);
  return finish(shape, std::move(out), {a, b}, [sa, sb, da, db](Node& self, BackwardContext& ctx) {
    Node* na = self.inputs[0].get();
    Node* nb = self.inputs[1].get();
    const auto& g = self.scratch;
    if (wants(na)) {
      auto ga = ctx.grad_of(*na);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i * sa] += g[i] * da(na->value[i * sa], nb->value[i * sb]);
    }
    if (wants(nb)) {
      auto gb = ctx.grad_of(*nb);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i * sb] += g[i] * db(na->value[i * sa], nb->value[i * sb]);
    }
  });
}

template <typename F, typename D>
Tensor unary_from_output(const Tensor& x, F f, D d_from_output) {
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return finish(x.shape(), std::move(out), {x}, [d_from_output](Node& self, BackwardContext& ctx) {
    Node* nx = self.inputs[0].get();
    auto gx = ctx.grad_of(*nx);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.scratch[i] * d_from_output(self.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor multiply(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "multiply", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  const auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return finish(a.shape(), std::move(out), {a}, [factor](Node& self, BackwardContext& ctx) {
    auto ga = ctx.grad_of(*self.inputs[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.scratch[i] * factor;
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  if (bias.size() != n) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not fit rows of " +
                         shape_string(x.shape()));
  }
  const auto xv = x.data();
  const auto bv = bias.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  return finish(x.shape(), std::move(out), {x, bias}, [m, n](Node& self, BackwardContext& ctx) {
    const auto& g = self.scratch;
    if (wants(self.inputs[0].get())) {
      auto gx = ctx.grad_of(*self.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (wants(self.inputs[1].get())) {
      auto gb = ctx.grad_of(*self.inputs[1]);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  const std::size_t n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents disagree for " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  return finish({m, n}, std::move(out), {a, b}, [m, k, n](Node& self, BackwardContext& ctx) {
    Node* na = self.inputs[0].get();
    Node* nb = self.inputs[1].get();
    const auto& g = self.scratch;
    if (wants(na)) {
      auto ga = ctx.grad_of(*na);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * nb->value[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (wants(nb)) {
      auto gb = ctx.grad_of(*nb);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = na->value[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  const auto av = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return finish({n, m}, std::move(out), {a}, [m, n](Node& self, BackwardContext& ctx) {
    auto ga = ctx.grad_of(*self.inputs[0]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.scratch[j * m + i];
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix(x, "linear");
  require_matrix(weight, "linear");
  const std::size_t m = x.rows();
  const std::size_t k = x.cols();
  const std::size_t n = weight.rows();
  if (weight.cols() != k) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.size() != n) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not match weight " +
                         shape_string(weight.shape()));
  }
  const auto xv = x.data();
  const auto wv = weight.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t o = 0; o < n; ++o) {
      double acc = has_bias ? bias.data()[o] : 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += xv[i * k + p] * wv[o * k + p];
      out[i * n + o] = acc;
    }
  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return finish({m, n}, std::move(out), inputs, [m, k, n, has_bias](Node& self, BackwardContext& ctx) {
    Node* nx = self.inputs[0].get();
    Node* nw = self.inputs[1].get();
    const auto& g = self.scratch;
    if (wants(nx)) {
      auto gx = ctx.grad_of(*nx);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t o = 0; o < n; ++o) {
          const double gio = g[i * n + o];
          if (gio == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) gx[i * k + p] += gio * nw->value[o * k + p];
        }
    }
    if (wants(nw)) {
      auto gw = ctx.grad_of(*nw);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t o = 0; o < n; ++o) {
          const double gio = g[i * n + o];
          if (gio == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) gw[o * k + p] += gio * nx->value[i * k + p];
        }
    }
    if (has_bias && wants(self.inputs[2].get())) {
      auto gb = ctx.grad_of(*self.inputs[2]);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t o = 0; o < n; ++o) gb[o] += g[i * n + o];
    }
  });
}

Tensor tanh(const Tensor& x) {
  return unary_from_output(
      x, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_from_output(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double y) { return y * (1.0 - y); });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * inv_sqrt2));
  return finish(x.shape(), std::move(out), {x}, [inv_sqrt_2pi](Node& self, BackwardContext& ctx) {
    Node* nx = self.inputs[0].get();
    auto gx = ctx.grad_of(*nx);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double v = nx->value[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      gx[i] += self.scratch[i] * (cdf + v * pdf);
    }
  });
}

Tensor softmax(const Tensor& x, int axis) {
  const auto& shape = x.shape();
  const int rank = static_cast<int>(shape.size());
  if (rank == 0) throw DimensionError("softmax needs at least one axis");
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw DimensionError("softmax: axis out of range for " + shape_string(shape));
  require_finite(x, "softmax");
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  for (int i = axis + 1; i < rank; ++i) inner *= shape[i];
  const std::size_t n = shape[axis];
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = xv[base];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= total;
    }
  return finish(shape, std::move(out), {x}, [outer, inner, n](Node& self, BackwardContext& ctx) {
    auto gx = ctx.grad_of(*self.inputs[0]);
    const auto& y = self.value;
    const auto& g = self.scratch;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = base + j * inner;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_matrix(x, "layer_norm");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  if (gamma.size() != n || beta.size() != n) {
    throw DimensionError("layer_norm: gain " + shape_string(gamma.shape()) + " / bias " +
                         shape_string(beta.shape()) + " do not fit " + shape_string(x.shape()));
  }
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  std::vector<double> out(m * n);
  std::vector<double> xhat(m * n);
  std::vector<double> rstd(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xv[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xv[i * n + j] - mu) * rstd[i];
      out[i * n + j] = xhat[i * n + j] * gv[j] + bv[j];
    }
  }
  return finish(x.shape(), std::move(out), {x, gamma, beta},
                [m, n, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self, BackwardContext& ctx) {
                  Node* nx = self.inputs[0].get();
                  Node* ng = self.inputs[1].get();
                  Node* nb = self.inputs[2].get();
                  const auto& g = self.scratch;
                  if (wants(nx)) {
                    auto gx = ctx.grad_of(*nx);
                    std::vector<double> dxhat(n);
                    for (std::size_t i = 0; i < m; ++i) {
                      double mean_d = 0.0, mean_dx = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        dxhat[j] = g[i * n + j] * ng->value[j];
                        mean_d += dxhat[j];
                        mean_dx += dxhat[j] * xhat[i * n + j];
                      }
                      mean_d /= static_cast<double>(n);
                      mean_dx /= static_cast<double>(n);
                      for (std::size_t j = 0; j < n; ++j)
                        gx[i * n + j] += rstd[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
                    }
                  }
                  if (wants(ng)) {
                    auto gg = ctx.grad_of(*ng);
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
                  }
                  if (wants(nb)) {
                    auto gb = ctx.grad_of(*nb);
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                  }
                });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
  require_matrix(table, "embedding_lookup");
  if (ids.empty()) throw DimensionError("embedding_lookup: empty id sequence");
  const std::size_t vocab = table.rows();
  const std::size_t d = table.cols();
  const auto tv = table.data();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw ArgumentError("embedding_lookup: id " + std::to_string(ids[i]) + " outside table of " +
                          std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d, out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  std::vector<std::size_t> saved(ids.begin(), ids.end());
  return finish({ids.size(), d}, std::move(out), {table}, [d, saved = std::move(saved)](Node& self, BackwardContext& ctx) {
    auto gt = ctx.grad_of(*self.inputs[0]);
    for (std::size_t i = 0; i < saved.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) gt[saved[i] * d + j] += self.scratch[i * d + j];
  });
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ArgumentError("dropout rate must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  const auto xv = x.data();
  std::vector<double> mask(xv.size());
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = rng.uniform() >= p ? keep_scale : 0.0;
    out[i] = xv[i] * mask[i];
  }
  return finish(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self, BackwardContext& ctx) {
    auto gx = ctx.grad_of(*self.inputs[0]);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.scratch[i] * mask[i];
  });
}

Tensor concatenate(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concatenate: nothing to join");
  if (axis > 1) throw DimensionError("concatenate: axis must be 0 or 1");
  for (const auto& p : parts) require_matrix(p, "concatenate");
  const std::size_t fixed = axis == 0 ? parts.front().cols() : parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    const std::size_t other = axis == 0 ? p.cols() : p.rows();
    if (other != fixed) {
      throw DimensionError("concatenate: " + shape_string(parts.front().shape()) + " vs " + shape_string(p.shape()));
    }
    total += axis == 0 ? p.rows() : p.cols();
  }
  const Shape shape = axis == 0 ? Shape{total, fixed} : Shape{fixed, total};
  std::vector<double> out(total * fixed);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const auto pv = p.data();
    if (axis == 0) {
      std::copy(pv.begin(), pv.end(), out.begin() + static_cast<std::ptrdiff_t>(offset * fixed));
      offset += p.rows();
    } else {
      const std::size_t c = p.cols();
      for (std::size_t i = 0; i < fixed; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * total + offset + j] = pv[i * c + j];
      offset += c;
    }
  }
  return finish(shape, std::move(out), parts,
                [axis, fixed, total, offsets = std::move(offsets)](Node& self, BackwardContext& ctx) {
                  for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                    Node* in = self.inputs[k].get();
                    if (!wants(in)) continue;
                    auto gi = ctx.grad_of(*in);
                    if (axis == 0) {
                      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += self.scratch[offsets[k] * fixed + i];
                    } else {
                      const std::size_t c = in->shape[1];
                      for (std::size_t i = 0; i < fixed; ++i)
                        for (std::size_t j = 0; j < c; ++j) gi[i * c + j] += self.scratch[i * total + offsets[k] + j];
                    }
                  }
                });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  require_matrix(x, "slice");
  if (axis > 1) throw DimensionError("slice: axis must be 0 or 1");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  const std::size_t extent = axis == 0 ? m : n;
  if (length == 0 || start + length > extent) {
    throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of range for " + shape_string(x.shape()));
  }
  const auto xv = x.data();
  if (axis == 0) {
    std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(start * n),
                            xv.begin() + static_cast<std::ptrdiff_t>((start + length) * n));
    return finish({length, n}, std::move(out), {x}, [start, n](Node& self, BackwardContext& ctx) {
      auto gx = ctx.grad_of(*self.inputs[0]);
      for (std::size_t i = 0; i < self.scratch.size(); ++i) gx[start * n + i] += self.scratch[i];
    });
  }
  std::vector<double> out(m * length);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < length; ++j) out[i * length + j] = xv[i * n + start + j];
  return finish({m, length}, std::move(out), {x}, [m, n, start, length](Node& self, BackwardContext& ctx) {
    auto gx = ctx.grad_of(*self.inputs[0]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < length; ++j) gx[i * n + start + j] += self.scratch[i * length + j];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return finish({}, {total}, {x}, [](Node& self, BackwardContext& ctx) {
    auto gx = ctx.grad_of(*self.inputs[0]);
    for (auto& g : gx) g += self.scratch[0];
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  for (double v : x.data()) total += v;
  return finish({}, {total / n}, {x}, [n](Node& self, BackwardContext& ctx) {
    auto gx = ctx.grad_of(*self.inputs[0]);
    for (auto& g : gx) g += self.scratch[0] / n;
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  require_matrix(logits, "cross_entropy");
  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  if (labels.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_string(logits.shape()));
  }
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] >= classes) {
      throw LabelError("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                           std::to_string(classes) + ")",
                       static_cast<long long>(labels[i]));
    }
  }
  require_finite(logits, "cross_entropy");
  const auto lv = logits.data();
  std::vector<double> probs(batch * classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double* row = lv.data() + i * classes;
    const double mx = *std::max_element(row, row + classes);
    double total = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      probs[i * classes + j] = std::exp(row[j] - mx);
      total += probs[i * classes + j];
    }
    for (std::size_t j = 0; j < classes; ++j) probs[i * classes + j] /= total;
    loss += (mx + std::log(total)) - row[labels[i]];
  }
  loss /= static_cast<double>(batch);
  std::vector<std::size_t> saved(labels.begin(), labels.end());
  return finish({}, {loss}, {logits},
                [batch, classes, probs = std::move(probs), saved = std::move(saved)](Node& self, BackwardContext& ctx) {
                  auto gl = ctx.grad_of(*self.inputs[0]);
                  const double g = self.scratch[0] / static_cast<double>(batch);
                  for (std::size_t i = 0; i < batch; ++i)
                    for (std::size_t j = 0; j < classes; ++j) {
                      const double onehot = j == saved[i] ? 1.0 : 0.0;
                      gl[i * classes + j] += g * (probs[i * classes + j] - onehot);
                    }
                });
}

}  // namespace compm

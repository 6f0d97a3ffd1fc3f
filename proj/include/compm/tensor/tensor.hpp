#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace compm {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class BackwardContext;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;     // user-visible accumulator
  std::vector<double> scratch;  // gradient of the current backward pass
  bool requires_grad = false;
  bool touched = false;
  std::size_t tape_index = 0;
  bool on_tape = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&, BackwardContext&)> backward;
};

}  // namespace detail

/// Handle to a row-major array of doubles with an optional gradient accumulator.
///
/// Copies share storage. Operations in ops.hpp return fresh tensors and, when
/// any input requires a gradient and recording is enabled, append a node to
/// the calling thread's tape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// Matrix from nested rows; every row must have the same length.
  static Tensor matrix(const std::vector<std::vector<double>>& rows, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  /// Extent of axis 0 and 1 of a rank-2 tensor.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  /// Direct write access. Mutating a tensor that a recorded graph still references
  /// invalidates the gradients of that graph.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  /// Accumulated gradient; empty span when nothing has been accumulated.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Fresh leaf with the same values and no history.
  Tensor detach() const;
  Tensor clone(bool requires_grad) const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Gradient buffers for one backward pass. Handed to each node's backward function.
class BackwardContext {
 public:
  /// Gradient slot for `node`, zero-initialized on first access.
  std::span<double> grad_of(detail::Node& node);
  std::vector<detail::Node*>& touched() { return touched_; }

 private:
  std::vector<detail::Node*> touched_;
};

/// Ordered record of executed operations for the calling thread.
class Tape {
 public:
  static Tape& current();

  void record(const std::shared_ptr<detail::Node>& node);
  /// Drops every recorded node. Tensors still held by callers keep their values.
  void clear();
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<std::shared_ptr<detail::Node>>& nodes() const noexcept { return nodes_; }

  static bool recording();

 private:
  friend class NoGradGuard;
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  int disabled_ = 0;
};

/// Disables tape recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// Reverse-mode sweep from a scalar root. Gradients of every reachable tensor that
/// requires a gradient are added to its accumulator; nothing is reset.
void backward(const Tensor& root);

}  // namespace compm

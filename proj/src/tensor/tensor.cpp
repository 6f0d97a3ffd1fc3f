#include "compm/tensor/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "compm/errors.hpp"

namespace compm {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " needs " + std::to_string(shape_size(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw ContractError("use of an undefined tensor");
  return *node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_size(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_size(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_node({}, {value}, requires_grad));
}

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows, bool requires_grad) {
  if (rows.empty() || rows.front().empty()) throw DimensionError("matrix needs at least one element");
  const auto cols = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw DimensionError("ragged matrix rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return from({rows.size(), cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return checked(node_).shape; }
std::size_t Tensor::size() const { return checked(node_).value.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got " + shape_string(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got " + shape_string(shape()));
  return shape()[1];
}

std::span<const double> Tensor::data() const { return checked(node_).value; }
std::span<double> Tensor::mutable_data() {
  checked(node_);
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const auto c = cols();
  if (row >= rows() || col >= c) throw DimensionError("index out of range for " + shape_string(shape()));
  return node_->value[row * c + col];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
void Tensor::set_requires_grad(bool flag) {
  checked(node_);
  node_->requires_grad = flag;
}

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }
std::span<const double> Tensor::grad() const { return checked(node_).grad; }

std::span<double> Tensor::mutable_grad() {
  checked(node_);
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  checked(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return clone(false); }

Tensor Tensor::clone(bool requires_grad) const {
  const auto& n = checked(node_);
  return Tensor(make_node(n.shape, n.value, requires_grad));
}

std::span<double> BackwardContext::grad_of(detail::Node& node) {
  if (!node.touched) {
    node.scratch.assign(node.value.size(), 0.0);
    node.touched = true;
    touched_.push_back(&node);
  }
  return node.scratch;
}

namespace {
thread_local Tape tls_tape;
}

Tape& Tape::current() { return tls_tape; }

bool Tape::recording() { return tls_tape.disabled_ == 0; }

void Tape::record(const std::shared_ptr<detail::Node>& node) {
  node->tape_index = nodes_.size();
  node->on_tape = true;
  nodes_.push_back(node);
}

void Tape::clear() {
  for (auto& node : nodes_) node->on_tape = false;
  nodes_.clear();
}

NoGradGuard::NoGradGuard() { ++tls_tape.disabled_; }
NoGradGuard::~NoGradGuard() { --tls_tape.disabled_; }

void backward(const Tensor& root) {
  if (!root.defined()) throw ContractError("backward on an undefined tensor");
  if (root.size() != 1) {
    throw ContractError("backward needs a scalar root, got shape " + shape_string(root.shape()));
  }
  auto& node = *root.node();
  if (!node.requires_grad) return;

  const auto& tape = Tape::current().nodes();
  if (node.backward) {
    if (!node.on_tape || node.tape_index >= tape.size() || tape[node.tape_index].get() != &node) {
      throw ContractError("backward root is not on this thread's tape (was the tape cleared?)");
    }
  }

  BackwardContext ctx;
  ctx.grad_of(node)[0] += 1.0;
  if (node.backward) {
    for (std::size_t i = node.tape_index + 1; i-- > 0;) {
      auto& current = *tape[i];
      if (current.touched && current.backward) current.backward(current, ctx);
    }
  }
  for (auto* touched : ctx.touched()) {
    if (touched->requires_grad) {
      if (touched->grad.empty()) touched->grad.assign(touched->value.size(), 0.0);
      for (std::size_t j = 0; j < touched->grad.size(); ++j) touched->grad[j] += touched->scratch[j];
    }
    touched->scratch.clear();
    touched->scratch.shrink_to_fit();
    touched->touched = false;
  }
}

}  // namespace compm

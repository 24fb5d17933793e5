#pragma once

// Dense float64 tensors with an optional reverse-mode tape.
//
// Tensors are immutable values. A tensor created through Tape::variable, or
// produced by an operation with at least one tracked input, is "tracked": it
// refers to a node on that tape, and Tape::backward propagates adjoints to
// every variable reachable from a scalar root. The tape must outlive every
// tensor that refers to it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace wvi {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t numel(const Shape& shape);

class Tape;

class Tensor {
 public:
  // Rank-0 zero.
  Tensor();
  // Rank-0 scalar.
  explicit Tensor(double scalar);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor matrix(const std::vector<std::vector<double>>& rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_->size(); }
  // Leading dimension for rank >= 1; 1 for scalars.
  std::size_t rows() const;
  // Trailing dimension for rank 2, dimension for rank 1, 1 for scalars.
  std::size_t cols() const;

  std::span<const double> values() const { return *data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  // Row-major element of a rank-2 tensor.
  double at(std::size_t r, std::size_t c) const;
  // The single value of a size-1 tensor.
  double item() const;
  std::vector<double> row(std::size_t r) const;

  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t node() const { return node_; }

  // Same values, no tape participation.
  Tensor detach() const;

 private:
  friend class Tape;
  friend class Gradients;

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
  std::uint64_t generation_ = 0;
};

// Gradients of a backward pass, keyed by the variable tensors that received one.
class Gradients {
 public:
  // Gradient of `variable`. Variables on the same tape that were not reachable
  // from the root get zeros; anything else is an error.
  Tensor of(const Tensor& variable) const;
  bool contains(const Tensor& variable) const;
  std::size_t size() const { return grads_.size(); }
  bool empty() const { return grads_.empty(); }

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::uint64_t generation_ = 0;
  std::unordered_map<std::size_t, Tensor> grads_;
};

class Tape {
 public:
  // Adjoint rule: accumulate into the input gradient buffers given the output
  // gradient. Input buffers are null for untracked inputs.
  using BackwardFn =
      std::function<void(std::span<const double> out_grad, std::span<std::vector<double>* const> in_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a differentiable leaf holding `value`'s data.
  Tensor variable(const Tensor& value);
  // Records `value` as a non-differentiable leaf: tracked, but never a gradient target.
  Tensor constant(const Tensor& value);

  // Records an operation result. Inputs that are not tracked on this tape are
  // treated as constants.
  Tensor record(Shape shape, std::vector<double> values, std::span<const Tensor* const> inputs, BackwardFn fn);

  Gradients backward(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  // Drops every node. Tensors recorded before the clear become detached-invalid:
  // using them in a tracked op raises an error.
  void clear();

  bool owns(const Tensor& t) const { return t.tape_ == this && t.generation_ == generation_; }

 private:
  struct Node {
    std::size_t numel = 0;
    Shape shape;
    std::vector<std::optional<std::size_t>> inputs;
    BackwardFn backward;
    bool is_variable = false;
  };

  std::vector<Node> nodes_;
  std::uint64_t generation_ = 1;
};

// ---- elementwise -----------------------------------------------------------

enum class BinaryKind { add, sub, mul, div };
enum class UnaryKind { exp, log, neg, relu, sqrt, square };
enum class ReduceKind { sum, mean, min, max, logsumexp };

// Broadcasting: equal shapes; a size-1 operand against anything; a row vector
// ({k} or {1,k}) against {r,k}; a column vector {r,1} against {r,k}.
Tensor binary_op(BinaryKind kind, const Tensor& a, const Tensor& b);
Tensor unary_op(UnaryKind kind, const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return binary_op(BinaryKind::add, a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return binary_op(BinaryKind::sub, a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return binary_op(BinaryKind::mul, a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return binary_op(BinaryKind::div, a, b); }
inline Tensor operator+(const Tensor& a, double b) { return a + Tensor(b); }
inline Tensor operator-(const Tensor& a, double b) { return a - Tensor(b); }
inline Tensor operator*(const Tensor& a, double b) { return a * Tensor(b); }
inline Tensor operator/(const Tensor& a, double b) { return a / Tensor(b); }
inline Tensor operator*(double a, const Tensor& b) { return Tensor(a) * b; }
inline Tensor operator-(const Tensor& a) { return unary_op(UnaryKind::neg, a); }

inline Tensor exp(const Tensor& a) { return unary_op(UnaryKind::exp, a); }
inline Tensor log(const Tensor& a) { return unary_op(UnaryKind::log, a); }
inline Tensor relu(const Tensor& a) { return unary_op(UnaryKind::relu, a); }
inline Tensor sqrt(const Tensor& a) { return unary_op(UnaryKind::sqrt, a); }
inline Tensor square(const Tensor& a) { return unary_op(UnaryKind::square, a); }

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---- reductions ------------------------------------------------------------

// Without an axis the result is a rank-0 scalar; with an axis that dimension is
// removed. min is evaluation-only and rejects tracked inputs. max routes its
// adjoint to the first maximal entry.
Tensor reduce(ReduceKind kind, const Tensor& a, std::optional<std::size_t> axis = std::nullopt);

inline Tensor sum(const Tensor& a, std::optional<std::size_t> axis = std::nullopt) {
  return reduce(ReduceKind::sum, a, axis);
}
inline Tensor logsumexp(const Tensor& a, std::optional<std::size_t> axis = std::nullopt) {
  return reduce(ReduceKind::logsumexp, a, axis);
}
inline Tensor mean(const Tensor& a, std::optional<std::size_t> axis = std::nullopt) {
  return reduce(ReduceKind::mean, a, axis);
}

// ---- structural ------------------------------------------------------------

// Same data, new shape of equal element count.
Tensor reshape(const Tensor& a, Shape shape);
// Rows [begin, end) of a rank-2 tensor.
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);

// Pairwise distances between the rows of a (n x d) and b (m x d): n x m.
// The Euclidean adjoint at zero distance is taken as 0.
enum class Metric { euclidean, squared_euclidean };
Tensor pairwise_distance(const Tensor& a, const Tensor& b, Metric metric);
// Per-row norm ||a_i|| (or ||a_i||^2) as an n x 1 column.
Tensor row_norm(const Tensor& a, Metric metric);

std::string to_string(Metric metric);
Metric parse_metric(const std::string& name);

bool all_finite(std::span<const double> values);

}  // namespace wvi

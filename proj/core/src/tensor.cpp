#include "wvi/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "wvi/error.hpp"

namespace wvi {

namespace {

constexpr double kMinDivisor = 1e-300;

const char* name_of(BinaryKind kind) {
  switch (kind) {
    case BinaryKind::add: return "add";
    case BinaryKind::sub: return "sub";
    case BinaryKind::mul: return "mul";
    case BinaryKind::div: return "div";
  }
  return "?";
}

const char* name_of(UnaryKind kind) {
  switch (kind) {
    case UnaryKind::exp: return "exp";
    case UnaryKind::log: return "log";
    case UnaryKind::neg: return "neg";
    case UnaryKind::relu: return "relu";
    case UnaryKind::sqrt: return "sqrt";
    case UnaryKind::square: return "square";
  }
  return "?";
}

const char* name_of(ReduceKind kind) {
  switch (kind) {
    case ReduceKind::sum: return "sum";
    case ReduceKind::mean: return "mean";
    case ReduceKind::min: return "min";
    case ReduceKind::max: return "max";
    case ReduceKind::logsumexp: return "logsumexp";
  }
  return "?";
}

// The tape shared by the tracked inputs, or null when none is tracked.
Tape* common_tape(std::span<const Tensor* const> inputs, const char* op) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->tracked()) continue;
    if (!t->tape()->owns(*t)) {
      throw std::logic_error(std::string(op) + ": input refers to a cleared tape");
    }
    if (tape != nullptr && tape != t->tape()) {
      throw std::logic_error(std::string(op) + ": inputs are recorded on different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

Tensor make_result(Shape shape, std::vector<double> values, std::initializer_list<const Tensor*> inputs,
                   const char* op, Tape::BackwardFn fn) {
  std::vector<const Tensor*> in(inputs);
  Tape* tape = common_tape(in, op);
  if (tape == nullptr) return Tensor(std::move(shape), std::move(values));
  return tape->record(std::move(shape), std::move(values), in, std::move(fn));
}

enum class Broadcast { same, a_scalar, b_scalar, a_row, b_row, a_col, b_col };

struct BroadcastPlan {
  Broadcast mode;
  Shape out;
  std::size_t k = 1;  // trailing dimension of the full operand
};

bool is_row_vector_of(const Shape& v, const Shape& m) {
  if (m.size() != 2) return false;
  if (v.size() == 1) return v[0] == m[1];
  return v.size() == 2 && v[0] == 1 && v[1] == m[1];
}

bool is_col_vector_of(const Shape& v, const Shape& m) {
  return m.size() == 2 && v.size() == 2 && v[1] == 1 && v[0] == m[0];
}

BroadcastPlan plan_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return {Broadcast::same, sa};
  // Single-element operands broadcast; the result keeps the higher-rank shape.
  if (b.size() == 1 && (a.size() != 1 || sa.size() >= sb.size())) return {Broadcast::b_scalar, sa};
  if (a.size() == 1) return {Broadcast::a_scalar, sb};
  if (is_row_vector_of(sa, sb)) return {Broadcast::a_row, sb, sb[1]};
  if (is_row_vector_of(sb, sa)) return {Broadcast::b_row, sa, sa[1]};
  if (is_col_vector_of(sa, sb)) return {Broadcast::a_col, sb, sb[1]};
  if (is_col_vector_of(sb, sa)) return {Broadcast::b_col, sa, sa[1]};
  throw ShapeError(std::string(op) + ": shapes " + to_string(sa) + " and " + to_string(sb) +
                   " are not broadcast-compatible");
}

std::size_t index_a(const BroadcastPlan& p, std::size_t i) {
  switch (p.mode) {
    case Broadcast::a_scalar: return 0;
    case Broadcast::a_row: return i % p.k;
    case Broadcast::a_col: return i / p.k;
    default: return i;
  }
}

std::size_t index_b(const BroadcastPlan& p, std::size_t i) {
  switch (p.mode) {
    case Broadcast::b_scalar: return 0;
    case Broadcast::b_row: return i % p.k;
    case Broadcast::b_col: return i / p.k;
    default: return i;
  }
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + to_string(t.shape()));
  }
}

}  // namespace

// ---- Shape / Tensor -------------------------------------------------------

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor() : Tensor(0.0) {}

Tensor::Tensor(double scalar) : data_(std::make_shared<const std::vector<double>>(1, scalar)) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (numel(shape_) != values.size()) {
    throw ShapeError("tensor: shape " + to_string(shape_) + " needs " + std::to_string(numel(shape_)) +
                     " values, got " + std::to_string(values.size()));
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows[0].size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("tensor: ragged matrix rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return matrix(r, c, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> values(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) values[i * n + i] = 1.0;
  return matrix(n, n, std::move(values));
}

std::size_t Tensor::rows() const {
  if (rank() == 0 || rank() == 1) return 1;
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() == 0) return 1;
  if (rank() == 1) return shape_[0];
  return size() / shape_[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + to_string(shape_) + " is not a scalar");
  return (*data_)[0];
}

std::vector<double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return {data_->begin() + static_cast<std::ptrdiff_t>(r * c), data_->begin() + static_cast<std::ptrdiff_t>((r + 1) * c)};
}

Tensor Tensor::detach() const {
  Tensor out;
  out.shape_ = shape_;
  out.data_ = data_;
  return out;
}

// ---- Gradients ----------------------------------------------------------------

Tensor Gradients::of(const Tensor& variable) const {
  if (tape_ == nullptr || variable.tape() != tape_ || variable.generation_ != generation_) {
    throw std::logic_error("gradients: tensor is not a variable of this backward pass");
  }
  auto it = grads_.find(variable.node());
  if (it == grads_.end()) return Tensor::zeros(variable.shape());
  return it->second;
}

bool Gradients::contains(const Tensor& variable) const {
  return variable.tape() == tape_ && variable.generation_ == generation_ && grads_.count(variable.node()) > 0;
}

// ---- Tape ---------------------------------------------------------------------

Tensor Tape::variable(const Tensor& value) {
  Node node;
  node.numel = value.size();
  node.shape = value.shape();
  node.is_variable = true;
  nodes_.push_back(std::move(node));
  Tensor out = value.detach();
  out.tape_ = this;
  out.node_ = nodes_.size() - 1;
  out.generation_ = generation_;
  return out;
}

Tensor Tape::constant(const Tensor& value) {
  Node node;
  node.numel = value.size();
  node.shape = value.shape();
  nodes_.push_back(std::move(node));
  Tensor out = value.detach();
  out.tape_ = this;
  out.node_ = nodes_.size() - 1;
  out.generation_ = generation_;
  return out;
}

Tensor Tape::record(Shape shape, std::vector<double> values, std::span<const Tensor* const> inputs, BackwardFn fn) {
  Node node;
  node.numel = values.size();
  node.backward = std::move(fn);
  node.inputs.reserve(inputs.size());
  for (const Tensor* t : inputs) {
    if (owns(*t)) {
      node.inputs.emplace_back(t->node());
    } else {
      node.inputs.emplace_back(std::nullopt);
    }
  }
  nodes_.push_back(std::move(node));
  Tensor out(std::move(shape), std::move(values));
  out.tape_ = this;
  out.node_ = nodes_.size() - 1;
  out.generation_ = generation_;
  return out;
}

Gradients Tape::backward(const Tensor& root) {
  if (!root.tracked()) throw std::invalid_argument("backward: root is not tape-tracked");
  if (!owns(root)) throw std::invalid_argument("backward: root belongs to a different or cleared tape");
  if (root.size() != 1) {
    throw ShapeError("backward: root must be a scalar, got shape " + to_string(root.shape()));
  }

  std::vector<std::vector<double>> grads(root.node() + 1);
  grads[root.node()] = {1.0};

  std::vector<std::vector<double>*> in_ptrs;
  for (std::size_t i = root.node() + 1; i-- > 0;) {
    if (grads[i].empty()) continue;
    Node& node = nodes_[i];
    if (!node.backward) continue;
    in_ptrs.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      if (!node.inputs[k]) continue;
      auto& buf = grads[*node.inputs[k]];
      if (buf.empty()) buf.assign(nodes_[*node.inputs[k]].numel, 0.0);
      in_ptrs[k] = &buf;
    }
    node.backward(grads[i], in_ptrs);
  }

  Gradients out;
  out.tape_ = this;
  out.generation_ = generation_;
  for (std::size_t i = 0; i <= root.node(); ++i) {
    if (!nodes_[i].is_variable || grads[i].empty()) continue;
    out.grads_.emplace(i, Tensor(nodes_[i].shape, std::move(grads[i])));
  }
  return out;
}

void Tape::clear() {
  nodes_.clear();
  nodes_.shrink_to_fit();
  ++generation_;
}

// ---- elementwise -------------------------------------------------------------------

Tensor binary_op(BinaryKind kind, const Tensor& a, const Tensor& b) {
  const char* op = name_of(kind);
  const BroadcastPlan plan = plan_broadcast(a, b, op);
  const std::size_t n = numel(plan.out);
  const auto av = a.values();
  const auto bv = b.values();

  if (kind == BinaryKind::div) {
    for (std::size_t j = 0; j < bv.size(); ++j) {
      if (!(std::abs(bv[j]) >= kMinDivisor)) {
        std::ostringstream os;
        os << "div: divisor entry " << j << " has magnitude " << std::abs(bv[j]) << " (< " << kMinDivisor << ")";
        throw DomainError(os.str());
      }
    }
  }

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[index_a(plan, i)];
    const double y = bv[index_b(plan, i)];
    switch (kind) {
      case BinaryKind::add: out[i] = x + y; break;
      case BinaryKind::sub: out[i] = x - y; break;
      case BinaryKind::mul: out[i] = x * y; break;
      case BinaryKind::div: out[i] = x / y; break;
    }
  }

  Tensor ad = a.detach();
  Tensor bd = b.detach();
  auto fn = [kind, plan, ad, bd](std::span<const double> g, std::span<std::vector<double>* const> in) {
    const auto av = ad.values();
    const auto bv = bd.values();
    std::vector<double>* ga = in[0];
    std::vector<double>* gb = in[1];
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t ia = index_a(plan, i);
      const std::size_t ib = index_b(plan, i);
      switch (kind) {
        case BinaryKind::add:
          if (ga) (*ga)[ia] += g[i];
          if (gb) (*gb)[ib] += g[i];
          break;
        case BinaryKind::sub:
          if (ga) (*ga)[ia] += g[i];
          if (gb) (*gb)[ib] -= g[i];
          break;
        case BinaryKind::mul:
          if (ga) (*ga)[ia] += g[i] * bv[ib];
          if (gb) (*gb)[ib] += g[i] * av[ia];
          break;
        case BinaryKind::div:
          if (ga) (*ga)[ia] += g[i] / bv[ib];
          if (gb) (*gb)[ib] -= g[i] * av[ia] / (bv[ib] * bv[ib]);
          break;
      }
    }
  };
  return make_result(plan.out, std::move(out), {&a, &b}, op, std::move(fn));
}

Tensor unary_op(UnaryKind kind, const Tensor& a) {
  const char* op = name_of(kind);
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double x = av[i];
    switch (kind) {
      case UnaryKind::exp: out[i] = std::exp(x); break;
      case UnaryKind::log:
        if (!(x > 0.0)) {
          std::ostringstream os;
          os << "log: entry " << i << " = " << x << " is not positive";
          throw DomainError(os.str());
        }
        out[i] = std::log(x);
        break;
      case UnaryKind::neg: out[i] = -x; break;
      case UnaryKind::relu: out[i] = x > 0.0 ? x : 0.0; break;
      case UnaryKind::sqrt:
        if (!(x >= 0.0)) {
          std::ostringstream os;
          os << "sqrt: entry " << i << " = " << x << " is negative";
          throw DomainError(os.str());
        }
        out[i] = std::sqrt(x);
        break;
      case UnaryKind::square: out[i] = x * x; break;
    }
  }

  Tensor ad = a.detach();
  auto yd = std::make_shared<const std::vector<double>>(out);
  auto fn = [kind, ad, yd](std::span<const double> g, std::span<std::vector<double>* const> in) {
    std::vector<double>* ga = in[0];
    if (!ga) return;
    const auto av = ad.values();
    const auto& y = *yd;
    for (std::size_t i = 0; i < g.size(); ++i) {
      switch (kind) {
        case UnaryKind::exp: (*ga)[i] += g[i] * y[i]; break;
        case UnaryKind::log: (*ga)[i] += g[i] / av[i]; break;
        case UnaryKind::neg: (*ga)[i] -= g[i]; break;
        case UnaryKind::relu:
          if (av[i] > 0.0) (*ga)[i] += g[i];
          break;
        case UnaryKind::sqrt:
          if (y[i] > 0.0) (*ga)[i] += g[i] / (2.0 * y[i]);
          break;
        case UnaryKind::square: (*ga)[i] += 2.0 * av[i] * g[i]; break;
      }
    }
  };
  return make_result(a.shape(), std::move(out), {&a}, op, std::move(fn));
}

// ---- linear algebra ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const std::size_t r = a.shape()[0];
  const std::size_t k = a.shape()[1];
  const std::size_t c = b.shape()[1];
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(r * c, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double* orow = out.data() + i * c;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * c;
      for (std::size_t j = 0; j < c; ++j) orow[j] += aip * brow[j];
    }
  }

  Tensor ad = a.detach();
  Tensor bd = b.detach();
  auto fn = [r, k, c, ad, bd](std::span<const double> g, std::span<std::vector<double>* const> in) {
    const auto av = ad.values();
    const auto bv = bd.values();
    if (std::vector<double>* ga = in[0]) {
      // dA = G B^T
      for (std::size_t i = 0; i < r; ++i) {
        const double* grow = g.data() + i * c;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = bv.data() + p * c;
          double acc = 0.0;
          for (std::size_t j = 0; j < c; ++j) acc += grow[j] * brow[j];
          (*ga)[i * k + p] += acc;
        }
      }
    }
    if (std::vector<double>* gb = in[1]) {
      // dB = A^T G
      for (std::size_t i = 0; i < r; ++i) {
        const double* grow = g.data() + i * c;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          double* gbrow = gb->data() + p * c;
          for (std::size_t j = 0; j < c; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  };
  return make_result({r, c}, std::move(out), {&a, &b}, "matmul", std::move(fn));
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t r = a.shape()[0];
  const std::size_t c = a.shape()[1];
  const auto av = a.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  auto fn = [r, c](std::span<const double> g, std::span<std::vector<double>* const> in) {
    if (!in[0]) return;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*in[0])[i * c + j] += g[j * r + i];
  };
  return make_result({c, r}, std::move(out), {&a}, "transpose", std::move(fn));
}

// ---- reductions ------------------------------------------------------------------

Tensor reduce(ReduceKind kind, const Tensor& a, std::optional<std::size_t> axis) {
  const char* op = name_of(kind);
  if (kind == ReduceKind::min && a.tracked()) {
    throw UnsupportedError("min: not differentiable; evaluate on detached tensors only");
  }
  std::size_t outer = 1, len = a.size(), inner = 1;
  Shape out_shape;
  if (axis) {
    if (*axis >= a.rank()) {
      throw ShapeError(std::string(op) + ": axis " + std::to_string(*axis) + " out of range for shape " +
                       to_string(a.shape()));
    }
    const Shape& s = a.shape();
    outer = numel(Shape(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(*axis)));
    len = s[*axis];
    inner = numel(Shape(s.begin() + static_cast<std::ptrdiff_t>(*axis) + 1, s.end()));
    out_shape = s;
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(*axis));
  }
  if (len == 0) throw ShapeError(std::string(op) + ": empty reduction");

  const auto av = a.values();
  std::vector<double> out(outer * inner);
  std::vector<std::size_t> arg(kind == ReduceKind::max ? out.size() : 0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t dst = o * inner + in;
      double acc = av[o * len * inner + in];
      std::size_t best = 0;
      for (std::size_t l = 1; l < len; ++l) {
        const double x = av[(o * len + l) * inner + in];
        switch (kind) {
          case ReduceKind::sum:
          case ReduceKind::mean: acc += x; break;
          case ReduceKind::min: acc = std::min(acc, x); break;
          case ReduceKind::max:
            if (x > acc) {
              acc = x;
              best = l;
            }
            break;
          case ReduceKind::logsumexp: break;
        }
      }
      if (kind == ReduceKind::mean) acc /= static_cast<double>(len);
      if (kind == ReduceKind::logsumexp) {
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < len; ++l) hi = std::max(hi, av[(o * len + l) * inner + in]);
        double total = 0.0;
        if (std::isfinite(hi)) {
          for (std::size_t l = 0; l < len; ++l) total += std::exp(av[(o * len + l) * inner + in] - hi);
        }
        acc = std::isfinite(hi) ? hi + std::log(total) : hi;
      }
      out[dst] = acc;
      if (kind == ReduceKind::max) arg[dst] = best;
    }
  }

  std::vector<double> softmax;
  if (kind == ReduceKind::logsumexp && a.tracked()) {
    softmax.resize(av.size());
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t src = (o * len + l) * inner + in;
          const double top = out[o * inner + in];
          softmax[src] = std::isfinite(top) ? std::exp(av[src] - top) : 0.0;
        }
  }
  auto fn = [kind, outer, len, inner, arg = std::move(arg), softmax = std::move(softmax)](
                std::span<const double> g, std::span<std::vector<double>* const> in_grads) {
    std::vector<double>* ga = in_grads[0];
    if (!ga) return;
    if (kind == ReduceKind::logsumexp) {
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t l = 0; l < len; ++l)
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t src = (o * len + l) * inner + in;
            (*ga)[src] += g[o * inner + in] * softmax[src];
          }
      return;
    }
    const double scale = kind == ReduceKind::mean ? 1.0 / static_cast<double>(len) : 1.0;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t dst = o * inner + in;
        if (kind == ReduceKind::max) {
          (*ga)[(o * len + arg[dst]) * inner + in] += g[dst];
          continue;
        }
        for (std::size_t l = 0; l < len; ++l) (*ga)[(o * len + l) * inner + in] += g[dst] * scale;
      }
    }
  };
  return make_result(std::move(out_shape), std::move(out), {&a}, op, std::move(fn));
}

// ---- structural ---------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  auto fn = [](std::span<const double> g, std::span<std::vector<double>* const> in) {
    if (!in[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i];
  };
  return make_result(std::move(shape), std::move(out), {&a}, "reshape", std::move(fn));
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_rows");
  if (begin > end || end > a.shape()[0]) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of bounds for shape " + to_string(a.shape()));
  }
  const std::size_t c = a.shape()[1];
  const auto av = a.values();
  std::vector<double> out(av.begin() + static_cast<std::ptrdiff_t>(begin * c),
                          av.begin() + static_cast<std::ptrdiff_t>(end * c));
  auto fn = [begin, c](std::span<const double> g, std::span<std::vector<double>* const> in) {
    if (!in[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[begin * c + i] += g[i];
  };
  return make_result({end - begin, c}, std::move(out), {&a}, "slice_rows", std::move(fn));
}

Tensor pairwise_distance(const Tensor& a, const Tensor& b, Metric metric) {
  require_rank2(a, "pairwise_distance");
  require_rank2(b, "pairwise_distance");
  if (a.shape()[1] != b.shape()[1]) {
    throw ShapeError("pairwise_distance: point dimensions differ, " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  const std::size_t n = a.shape()[0];
  const std::size_t m = b.shape()[0];
  const std::size_t d = a.shape()[1];
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < d; ++p) {
        const double diff = av[i * d + p] - bv[j * d + p];
        acc += diff * diff;
      }
      out[i * m + j] = metric == Metric::euclidean ? std::sqrt(acc) : acc;
    }
  }

  Tensor ad = a.detach();
  Tensor bd = b.detach();
  auto dist = std::make_shared<const std::vector<double>>(out);
  auto fn = [n, m, d, metric, ad, bd, dist](std::span<const double> g, std::span<std::vector<double>* const> in) {
    const auto av = ad.values();
    const auto bv = bd.values();
    std::vector<double>* ga = in[0];
    std::vector<double>* gb = in[1];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double gij = g[i * m + j];
        if (gij == 0.0) continue;
        double scale;
        if (metric == Metric::euclidean) {
          const double dij = (*dist)[i * m + j];
          if (dij == 0.0) continue;
          scale = gij / dij;
        } else {
          scale = 2.0 * gij;
        }
        for (std::size_t p = 0; p < d; ++p) {
          const double diff = scale * (av[i * d + p] - bv[j * d + p]);
          if (ga) (*ga)[i * d + p] += diff;
          if (gb) (*gb)[j * d + p] -= diff;
        }
      }
    }
  };
  return make_result({n, m}, std::move(out), {&a, &b}, "pairwise_distance", std::move(fn));
}

Tensor row_norm(const Tensor& a, Metric metric) {
  require_rank2(a, "row_norm");
  return pairwise_distance(a, Tensor::zeros({1, a.shape()[1]}), metric);
}

std::string to_string(Metric metric) {
  return metric == Metric::euclidean ? "euclidean" : "sqeuclidean";
}

Metric parse_metric(const std::string& name) {
  if (name == "euclidean") return Metric::euclidean;
  if (name == "sqeuclidean" || name == "squared_euclidean") return Metric::squared_euclidean;
  throw ConfigError("unknown metric '" + name + "' (expected euclidean or sqeuclidean)");
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace wvi

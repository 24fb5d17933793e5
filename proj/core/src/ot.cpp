#include "wvi/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "wvi/error.hpp"

namespace wvi {

namespace {

constexpr double kWeightTol = 1e-10;
constexpr double kUnderflow = 1e-300;

void check_weights(std::span<const double> w, std::size_t expected, const char* which) {
  if (w.size() != expected) {
    throw ShapeError(std::string("sinkhorn: ") + which + " weights have length " + std::to_string(w.size()) +
                     ", cost matrix needs " + std::to_string(expected));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) {
      throw DomainError(std::string("sinkhorn: ") + which + " weight " + std::to_string(i) + " is invalid");
    }
    total += w[i];
  }
  if (std::abs(total - 1.0) > kWeightTol) {
    std::ostringstream os;
    os << "sinkhorn: " << which << " weights sum to " << total << ", expected 1";
    throw DomainError(os.str());
  }
}

void check_cost(const Tensor& cost, const char* op) {
  if (cost.rank() != 2 || cost.shape()[0] == 0 || cost.shape()[1] == 0) {
    throw ShapeError(std::string(op) + ": cost must be a non-empty matrix, got " + to_string(cost.shape()));
  }
  const auto cv = cost.values();
  const std::size_t m = cost.shape()[1];
  for (std::size_t i = 0; i < cv.size(); ++i) {
    if (!std::isfinite(cv[i]) || cv[i] < 0.0) {
      std::ostringstream os;
      os << op << ": cost entry (" << i / m << "," << i % m << ") = " << cv[i] << " is not a finite non-negative value";
      throw DomainError(os.str());
    }
  }
}

// C - rowmin - colmin, as plain values.
std::vector<double> offset_costs(const Tensor& cost) {
  const std::size_t n = cost.shape()[0];
  const std::size_t m = cost.shape()[1];
  std::vector<double> c(cost.values().begin(), cost.values().end());
  for (std::size_t j = 0; j < n; ++j) {
    const double lo = *std::min_element(c.begin() + static_cast<std::ptrdiff_t>(j * m),
                                        c.begin() + static_cast<std::ptrdiff_t>((j + 1) * m));
    for (std::size_t k = 0; k < m; ++k) c[j * m + k] -= lo;
  }
  for (std::size_t k = 0; k < m; ++k) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) lo = std::min(lo, c[j * m + k]);
    for (std::size_t j = 0; j < n; ++j) c[j * m + k] -= lo;
  }
  return c;
}

void check_kernel(const Tensor& kernel, const Tensor& cost, double epsilon) {
  const std::size_t n = kernel.shape()[0];
  const std::size_t m = kernel.shape()[1];
  const auto kv = kernel.values();
  auto fail = [&](const char* what, std::size_t idx, double total) {
    const auto cv = cost.values();
    const double hi = *std::max_element(cv.begin(), cv.end());
    std::ostringstream os;
    os << "sinkhorn: kernel underflow, " << what << ' ' << idx << " of exp(-C/eps) sums to " << total << " (< "
       << kUnderflow << "; eps=" << epsilon << ", max cost=" << hi
       << "); use a larger epsilon or normalize the cost matrix";
    throw NumericalError(os.str());
  };
  for (std::size_t k = 0; k < m; ++k) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += kv[j * m + k];
    if (!(total >= kUnderflow)) fail("column", k, total);
  }
  for (std::size_t j = 0; j < n; ++j) {
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) total += kv[j * m + k];
    if (!(total >= kUnderflow)) fail("row", j, total);
  }
}

// Row-marginal violation of diag(u) K diag(c / K^T u), computed on plain values.
double row_violation(std::span<const double> kernel, std::span<const double> u, std::span<const double> r,
                     std::span<const double> c, std::size_t n, std::size_t m) {
  std::vector<double> v(m, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < m; ++k) v[k] += kernel[j * m + k] * u[j];
  for (std::size_t k = 0; k < m; ++k) v[k] = c[k] / v[k];
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double row = 0.0;
    for (std::size_t k = 0; k < m; ++k) row += kernel[j * m + k] * v[k];
    worst = std::max(worst, std::abs(u[j] * row - r[j]));
  }
  return worst;
}

}  // namespace

// ---- distributions and cost matrices -------------------------------------------

std::vector<double> uniform_weights(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

DiscreteDistribution DiscreteDistribution::uniform(Tensor points) {
  const std::size_t n = points.rows();
  return {std::move(points), uniform_weights(n)};
}

void DiscreteDistribution::validate() const {
  if (weights.empty()) throw ShapeError("distribution: needs at least one point");
  if (points.rank() != 2 || points.shape()[0] != weights.size()) {
    throw ShapeError("distribution: " + std::to_string(weights.size()) + " weights for points of shape " +
                     to_string(points.shape()));
  }
  check_weights(weights, weights.size(), "distribution");
}

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError("sinkhorn: epsilon must be positive, got " + std::to_string(epsilon));
  }
  if (iterations < 1) throw ConfigError("sinkhorn: iterations must be >= 1, got " + std::to_string(iterations));
  if (stop_tol && !(*stop_tol > 0.0)) throw ConfigError("sinkhorn: stop_tol must be positive");
}

Tensor build_cost_matrix(const Tensor& a, const Tensor& b, Metric metric) {
  return pairwise_distance(a, b, metric);
}

Tensor build_cost_matrix(const DiscreteDistribution& a, const DiscreteDistribution& b, const PairCost& cost) {
  a.validate();
  b.validate();
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<double> out(n * m);
  for (std::size_t j = 0; j < n; ++j) {
    const auto pa = a.points.row(j);
    for (std::size_t k = 0; k < m; ++k) {
      const auto pb = b.points.row(k);
      const double c = cost(pa, pb);
      if (!std::isfinite(c) || c < 0.0) {
        std::ostringstream os;
        os << "cost matrix: cost of pair (" << j << "," << k << ") = " << c << " is not a finite non-negative value";
        throw DomainError(os.str());
      }
      out[j * m + k] = c;
    }
  }
  return Tensor::matrix(n, m, std::move(out));
}

// ---- Sinkhorn ----------------------------------------------------------------------

namespace {

SinkhornResult sinkhorn_log(const Tensor& cost, const Tensor& base, std::span<const double> weights_a,
                            std::span<const double> weights_b, const SinkhornConfig& config) {
  const std::size_t n = cost.shape()[0];
  const std::size_t m = cost.shape()[1];
  std::vector<double> lr(n), lc(m);
  for (std::size_t j = 0; j < n; ++j) lr[j] = std::log(weights_a[j]);
  for (std::size_t k = 0; k < m; ++k) lc[k] = std::log(weights_b[k]);
  const Tensor log_r = Tensor::matrix(n, 1, lr);
  const Tensor log_c = Tensor::vector(lc);
  const Tensor log_kernel = base * (-1.0 / config.epsilon);

  // f = log u, g = log v.
  auto update_g = [&](const Tensor& f) { return log_c - logsumexp(log_kernel + f, 0); };
  auto update_f = [&](const Tensor& g) { return log_r - reshape(logsumexp(log_kernel + g, 1), {n, 1}); };
  auto rows_off = [&](const Tensor& f, const Tensor& g) {
    const Tensor lp = (log_kernel + f + g).detach();
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double row = 0.0;
      for (std::size_t k = 0; k < m; ++k) row += std::exp(lp.at(j, k));
      worst = std::max(worst, std::abs(row - weights_a[j]));
    }
    return worst;
  };

  Tensor f = log_r;
  int done = 0;
  for (int it = 0; it < config.iterations; ++it) {
    f = update_f(update_g(f));
    done = it + 1;
    if (config.stop_tol && rows_off(f, update_g(f.detach())) < *config.stop_tol) break;
  }
  const Tensor g = update_g(f);
  const Tensor plan = exp(log_kernel + f + g);
  const Tensor value = sum(plan * cost);

  SinkhornResult result{value, {plan.detach(), 0.0, done}};
  result.coupling.marginal_violation = marginal_violation(result.coupling.plan, weights_a, weights_b);
  if (!std::isfinite(value.item())) {
    throw NumericalError("sinkhorn: non-finite value in the log-domain iteration (eps=" +
                         std::to_string(config.epsilon) + ")");
  }
  return result;
}

}  // namespace

SinkhornResult sinkhorn(const Tensor& cost, std::span<const double> weights_a, std::span<const double> weights_b,
                        const SinkhornConfig& config) {
  config.validate();
  check_cost(cost, "sinkhorn");
  const std::size_t n = cost.shape()[0];
  const std::size_t m = cost.shape()[1];
  check_weights(weights_a, n, "source");
  check_weights(weights_b, m, "target");

  Tensor base = cost;
  // Offset values, with the cost's adjoint passed straight through.
  if (config.offset_kernel) base = Tensor::matrix(n, m, offset_costs(cost)) + (cost - cost.detach());
  if (config.log_domain) return sinkhorn_log(cost, base, weights_a, weights_b, config);
  const Tensor kernel = exp(base * (-1.0 / config.epsilon));
  check_kernel(kernel, cost, config.epsilon);

  const Tensor r = Tensor::matrix(n, 1, {weights_a.begin(), weights_a.end()});
  const Tensor c = Tensor::matrix(m, 1, {weights_b.begin(), weights_b.end()});
  const Tensor kernel_t = transpose(kernel);

  Tensor u = r;
  int done = 0;
  for (int it = 0; it < config.iterations; ++it) {
    const Tensor b = c / matmul(kernel_t, u);
    u = r / matmul(kernel, b);
    done = it + 1;
    if (config.stop_tol &&
        row_violation(kernel.values(), u.values(), r.values(), c.values(), n, m) < *config.stop_tol) {
      break;
    }
  }
  const Tensor v = c / matmul(kernel_t, u);
  const Tensor value = sum(u * matmul(kernel * cost, v));

  std::vector<double> plan(n * m);
  const auto kv = kernel.values();
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < m; ++k) plan[j * m + k] = u[j] * kv[j * m + k] * v[k];

  SinkhornResult result{value, {Tensor::matrix(n, m, std::move(plan)), 0.0, done}};
  result.coupling.marginal_violation = marginal_violation(result.coupling.plan, weights_a, weights_b);
  return result;
}

SinkhornResult sinkhorn(const Tensor& cost, const SinkhornConfig& config) {
  if (cost.rank() != 2) throw ShapeError("sinkhorn: cost must be a matrix, got " + to_string(cost.shape()));
  const auto a = uniform_weights(cost.shape()[0]);
  const auto b = uniform_weights(cost.shape()[1]);
  return sinkhorn(cost, a, b, config);
}

Tensor sinkhorn_value(const Tensor& cost, std::span<const double> weights_a, std::span<const double> weights_b,
                      const SinkhornConfig& config) {
  return sinkhorn(cost, weights_a, weights_b, config).value;
}

Coupling sinkhorn_plan(const Tensor& cost, std::span<const double> weights_a, std::span<const double> weights_b,
                       const SinkhornConfig& config) {
  return sinkhorn(cost.detach(), weights_a, weights_b, config).coupling;
}

double marginal_violation(const Tensor& plan, std::span<const double> weights_a, std::span<const double> weights_b) {
  const std::size_t n = plan.shape()[0];
  const std::size_t m = plan.shape()[1];
  const auto pv = plan.values();
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double row = 0.0;
    for (std::size_t k = 0; k < m; ++k) row += pv[j * m + k];
    worst = std::max(worst, std::abs(row - weights_a[j]));
  }
  for (std::size_t k = 0; k < m; ++k) {
    double col = 0.0;
    for (std::size_t j = 0; j < n; ++j) col += pv[j * m + k];
    worst = std::max(worst, std::abs(col - weights_b[k]));
  }
  return worst;
}

double coupling_mutual_information(const Tensor& plan, std::span<const double> weights_a,
                                   std::span<const double> weights_b) {
  const std::size_t n = plan.shape()[0];
  const std::size_t m = plan.shape()[1];
  const auto pv = plan.values();
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      const double g = pv[j * m + k];
      if (g > 0.0) total += g * std::log(g / (weights_a[j] * weights_b[k]));
    }
  }
  return total;
}

// ---- exact solvers -------------------------------------------------------------------

Assignment solve_assignment(const Tensor& cost) {
  if (cost.rank() != 2 || cost.shape()[0] != cost.shape()[1]) {
    throw ShapeError("assignment: cost must be square, got " + to_string(cost.shape()));
  }
  const std::size_t n = cost.shape()[0];
  if (n > kExactAssignmentLimit) {
    throw std::length_error("assignment: " + std::to_string(n) + " rows exceeds the oracle limit of " +
                            std::to_string(kExactAssignmentLimit));
  }
  const auto c = cost.values();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual start column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of_col[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.column_of_row.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.column_of_row[row_of_col[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) out.total_cost += c[i * n + out.column_of_row[i]];
  return out;
}

namespace {

bool is_uniform(std::span<const double> w) {
  const double target = 1.0 / static_cast<double>(w.size());
  return std::all_of(w.begin(), w.end(), [&](double x) { return std::abs(x - target) <= 1e-12; });
}

// Successive shortest paths on source -> rows -> columns -> sink with
// Bellman-Ford, exact for real-valued supplies.
double transport_min_cost_flow(std::span<const double> cost, std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  struct Edge {
    std::size_t to;
    double cap;
    double cost;
  };
  const std::size_t source = n + m;
  const std::size_t sink = n + m + 1;
  const std::size_t nodes = n + m + 2;
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> adj(nodes);
  auto add_edge = [&](std::size_t from, std::size_t to, double cap, double c) {
    adj[from].push_back(edges.size());
    edges.push_back({to, cap, c});
    adj[to].push_back(edges.size());
    edges.push_back({from, 0.0, -c});
  };
  for (std::size_t j = 0; j < n; ++j) add_edge(source, j, a[j], 0.0);
  for (std::size_t k = 0; k < m; ++k) add_edge(n + k, sink, b[k], 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < m; ++k) add_edge(j, n + k, 2.0, cost[j * m + k]);

  constexpr double kCapEps = 1e-15;
  const double inf = std::numeric_limits<double>::infinity();
  double total_cost = 0.0;
  double flow = 0.0;
  for (std::size_t guard = 0; guard < 4 * (n * m + n + m) + 8 && flow < 1.0 - 1e-12; ++guard) {
    std::vector<double> dist(nodes, inf);
    std::vector<std::size_t> via(nodes, edges.size());
    dist[source] = 0.0;
    for (std::size_t pass = 0; pass + 1 < nodes; ++pass) {
      bool changed = false;
      for (std::size_t from = 0; from < nodes; ++from) {
        if (dist[from] == inf) continue;
        for (std::size_t e : adj[from]) {
          if (edges[e].cap <= kCapEps) continue;
          const double nd = dist[from] + edges[e].cost;
          if (nd < dist[edges[e].to] - 1e-14) {
            dist[edges[e].to] = nd;
            via[edges[e].to] = e;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[sink] == inf) break;
    double push = inf;
    for (std::size_t node = sink; node != source; node = edges[via[node] ^ 1].to) {
      push = std::min(push, edges[via[node]].cap);
    }
    for (std::size_t node = sink; node != source; node = edges[via[node] ^ 1].to) {
      edges[via[node]].cap -= push;
      edges[via[node] ^ 1].cap += push;
    }
    flow += push;
    total_cost += push * dist[sink];
  }
  return total_cost;
}

}  // namespace

double exact_ot(const Tensor& cost, std::span<const double> weights_a, std::span<const double> weights_b) {
  check_cost(cost, "exact_ot");
  const std::size_t n = cost.shape()[0];
  const std::size_t m = cost.shape()[1];
  check_weights(weights_a, n, "source");
  check_weights(weights_b, m, "target");
  if (n == m && is_uniform(weights_a) && is_uniform(weights_b)) {
    return solve_assignment(cost.detach()).total_cost / static_cast<double>(n);
  }
  if (n * m > kExactGeneralLimit) {
    throw std::length_error("exact_ot: " + std::to_string(n) + "x" + std::to_string(m) +
                            " instance exceeds the general-weight limit of " + std::to_string(kExactGeneralLimit) +
                            " entries");
  }
  return transport_min_cost_flow(cost.values(), weights_a, weights_b);
}

double exact_ot(const Tensor& cost) {
  if (cost.rank() != 2) throw ShapeError("exact_ot: cost must be a matrix, got " + to_string(cost.shape()));
  const auto a = uniform_weights(cost.shape()[0]);
  const auto b = uniform_weights(cost.shape()[1]);
  return exact_ot(cost, a, b);
}

}  // namespace wvi

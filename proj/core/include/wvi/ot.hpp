#pragma once

// Entropic optimal transport between discrete distributions.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "wvi/tensor.hpp"

namespace wvi {

struct DiscreteDistribution {
  Tensor points;                // n x d
  std::vector<double> weights;  // n, sums to 1

  static DiscreteDistribution uniform(Tensor points);
  std::size_t size() const { return weights.size(); }
  void validate() const;
};

std::vector<double> uniform_weights(std::size_t n);

struct SinkhornConfig {
  double epsilon = 0.1;
  int iterations = 20;
  // Stop once the row-marginal violation falls below this value.
  std::optional<double> stop_tol;
  // Build the kernel from C - rowmin - colmin instead of C. The plan at the fixed
  // point is unchanged but every row and column of the kernel holds a 1, so small
  // epsilon cannot underflow. The offsets are treated as constants on the tape.
  bool offset_kernel = false;
  // Carry log u and log v and apply the kernel through log-sum-exp. Same iterates
  // as the plain scaling, but the scalings cannot overflow, so epsilon can be far
  // below the cost spread.
  bool log_domain = false;

  void validate() const;
};

struct Coupling {
  Tensor plan;  // n x m, untracked
  double marginal_violation = 0.0;
  int iterations = 0;
};

struct SinkhornResult {
  Tensor value;  // scalar; tracked iff the cost is
  Coupling coupling;
};

// Per-pair cost on raw point rows, for evaluation paths.
using PairCost = std::function<double(std::span<const double>, std::span<const double>)>;

// entries[j][k] = metric(a_j, b_k); tracked iff a or b is.
Tensor build_cost_matrix(const Tensor& a, const Tensor& b, Metric metric);
// Untracked; rejects negative or non-finite costs naming the pair.
Tensor build_cost_matrix(const DiscreteDistribution& a, const DiscreteDistribution& b, const PairCost& cost);

// Runs the scaling iterations
//   u <- r / (K v),  v <- c / (K^T u),  K = exp(-C / eps)
// starting from u = r, and returns S = sum_jk u_j K_jk C_jk v_k with the final v
// computed from the final u.
SinkhornResult sinkhorn(const Tensor& cost, std::span<const double> weights_a, std::span<const double> weights_b,
                        const SinkhornConfig& config);
SinkhornResult sinkhorn(const Tensor& cost, const SinkhornConfig& config);

Tensor sinkhorn_value(const Tensor& cost, std::span<const double> weights_a, std::span<const double> weights_b,
                      const SinkhornConfig& config);
Coupling sinkhorn_plan(const Tensor& cost, std::span<const double> weights_a, std::span<const double> weights_b,
                       const SinkhornConfig& config);

// Largest absolute deviation of the plan's row and column sums from the marginals.
double marginal_violation(const Tensor& plan, std::span<const double> weights_a, std::span<const double> weights_b);

// KL(plan || a (x) b): the mutual information carried by the coupling.
double coupling_mutual_information(const Tensor& plan, std::span<const double> weights_a,
                                   std::span<const double> weights_b);

// ---- exact solvers ----------------------------------------------------------

struct Assignment {
  std::vector<std::size_t> column_of_row;
  double total_cost = 0.0;
};

// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with potentials).
Assignment solve_assignment(const Tensor& cost);

// Exact unregularized transport cost. Uniform equal-size marginals go through the
// assignment solver; otherwise successive shortest paths on the transport graph,
// limited to n*m <= 64 entries.
double exact_ot(const Tensor& cost, std::span<const double> weights_a, std::span<const double> weights_b);
double exact_ot(const Tensor& cost);

inline constexpr std::size_t kExactGeneralLimit = 64;
inline constexpr std::size_t kExactAssignmentLimit = 2000;

}  // namespace wvi

#pragma once

// Transport cost functionals between joint samples (x, z):
//   w1  d_x(x1, x2)                       observable metric
//   w2  d_x(g(z1), g(z2))                 pullback of d_x through the decoder
//   w3  d(z1 - h(x1), z2 - h(x2))         latent autoencoder residuals
//   w4  d(x1 - g(z1), x2 - g(z2))         observable autoencoder residuals
//   w5  f(p(x,z) / q(x,z)) under q        f-divergence term

#include <array>
#include <functional>
#include <string>

#include "wvi/models.hpp"
#include "wvi/tensor.hpp"

namespace wvi {

enum class FKind { none, reverse_kl, forward_kl };
std::string to_string(FKind kind);
FKind parse_f_kind(const std::string& name);

struct WeightVector {
  std::array<double, 5> w{1.0, 1.0, 1.0, 1.0, 0.0};

  static WeightVector parse(const std::string& text);  // "1,1,1,1,0"
  double operator[](std::size_t i) const { return w[i]; }
  double& operator[](std::size_t i) { return w[i]; }
  // Any of w1..w4 positive.
  bool transport_active() const;
  void validate() const;
  std::string str() const;
};

struct CostFunctionalSpec {
  WeightVector weights;
  Metric observable_metric = Metric::euclidean;
  Metric residual_metric = Metric::euclidean;
  FKind f_kind = FKind::none;

  void validate() const;
};

using Mapping = std::function<Tensor(const Tensor&)>;

// Batched forms: rows of the first arguments index j, rows of the second index k;
// each returns an n x m matrix.
Tensor pullback_cost(const Tensor& z1, const Tensor& z2, const Mapping& decoder, Metric metric);
Tensor latent_ae_cost(const Tensor& x1, const Tensor& z1, const Tensor& x2, const Tensor& z2, const Mapping& encoder,
                      Metric metric);
Tensor observable_ae_cost(const Tensor& x1, const Tensor& z1, const Tensor& x2, const Tensor& z2,
                          const Mapping& decoder, Metric metric);

// Per-sample f(p/q) for samples drawn from q, given log p and log q at those samples ({n} each).
Tensor f_integrand(const Tensor& log_p, const Tensor& log_q, FKind kind);
// f(r) - f'(1)(r - 1). Nonnegative pointwise; same expectation under q when p and q are
// normalized densities.
Tensor centered_f_integrand(const Tensor& log_p, const Tensor& log_q, FKind kind);
double f_prime_at_one(FKind kind);
// Mean of f_integrand.
Tensor f_divergence_estimate(const Tensor& log_p, const Tensor& log_q, FKind kind);

// E_q[f(p(x,z) / q(x,z))] on a q-batch. Only reverse_kl is defined for the joint
// model: the empirical k(x) contributes a parameter-free constant that is dropped,
// leaving mean(log q(z|x) - log p(x,z)).
Tensor f_term(const JointBatch& batch_q, const ModelPair& models, FKind kind);

struct TotalCost {
  Tensor matrix;                     // n x m, sum over i of w_i * coupled[i]
  Tensor separable;                  // scalar, sum over i of w_i * separable_parts[i]
  std::array<Tensor, 5> coupled;     // unweighted n x m matrices; empty (rank 0) when unused
  std::array<Tensor, 5> separable_parts;  // unweighted scalars
  bool transport_active = false;     // some coupled matrix is present
};

// Deterministic-generator sides (model_p with obs_sigma == 0) have zero observable
// residuals, so w4 reduces to the mean of d(0, residual) over the other side and is
// moved to the separable part. The f-term only enters when the batches come from
// different origins; against itself the density ratio is 1 and f(1) = 0.
TotalCost assemble_total_cost_matrix(const JointBatch& batch_a, const JointBatch& batch_b,
                                     const CostFunctionalSpec& spec, const ModelPair& models);

}  // namespace wvi

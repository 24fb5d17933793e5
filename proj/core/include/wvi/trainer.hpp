#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wvi/adam.hpp"
#include "wvi/costs.hpp"
#include "wvi/models.hpp"
#include "wvi/ot.hpp"

namespace wvi {

struct LossOptions {
  double epsilon = 0.1;
  int iterations = 20;
  // Divide the cost matrix by its maximum before Sinkhorn and scale the value back.
  bool normalize_cost = true;
  bool offset_kernel = false;
  bool log_domain = false;

  SinkhornConfig sinkhorn() const;
};

struct LossValue {
  Tensor value;                          // scalar; tracked iff the batches or models are
  std::array<double, 5> components{};    // weighted contribution of each w_i
  double cost_scale = 1.0;               // divisor applied before Sinkhorn
  double cost_min = 0.0;                 // range of the assembled matrix
  double cost_max = 0.0;
  std::optional<Coupling> coupling;      // absent when no coupled term is active
};

// Monte Carlo c-Wasserstein loss between two matched batches: Sinkhorn value of
// the coupled cost matrix plus the separable terms.
LossValue wasserstein_loss(const JointBatch& a, const JointBatch& b, const CostFunctionalSpec& spec,
                           const ModelPair& models, const LossOptions& options);
Tensor mc_wasserstein_loss(const JointBatch& a, const JointBatch& b, const CostFunctionalSpec& spec,
                           const ModelPair& models, const LossOptions& options);

struct DebiasedLoss {
  Tensor raw;       // L(p, q)
  Tensor debiased;  // L(p, q) - (L(p, p') + L(q, q')) / 2
  LossValue cross;
};

// Self-terms against independent batches p2 ~ p and q2 ~ q.
DebiasedLoss debiased_loss(const JointBatch& p, const JointBatch& q, const JointBatch& p2, const JointBatch& q2,
                           const CostFunctionalSpec& spec, const ModelPair& models, const LossOptions& options);
// Self-terms L(p, p) and L(q, q) on the same batches; exactly 0 when p and q are equal.
DebiasedLoss debiased_loss(const JointBatch& p, const JointBatch& q, const CostFunctionalSpec& spec,
                           const ModelPair& models, const LossOptions& options);

struct TrainConfig {
  CostFunctionalSpec cost{WeightVector{}, Metric::euclidean, Metric::euclidean, FKind::none};
  double epsilon = 0.1;
  int sinkhorn_t = 20;
  std::size_t batch_n = 32;
  AdamConfig adam;
  std::size_t epochs = 1;
  std::size_t steps_per_epoch = 100;
  std::uint64_t seed = 0;
  bool debias = true;
  bool normalize_cost = true;

  LossOptions loss_options() const { return {epsilon, sinkhorn_t, normalize_cost, false}; }
  std::size_t total_steps() const { return epochs * steps_per_epoch; }
  void validate() const;
};

struct LossReport {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double loss = 0.0;           // raw L(p, q)
  double debiased_loss = 0.0;  // equals loss when debiasing is off
  std::array<double, 5> components{};
  double cost_scale = 1.0;
  double time_ms = 0.0;
  std::size_t tape_nodes = 0;
};

// Samples fresh batches, evaluates the (debiased) loss on a fresh tape,
// backpropagates and applies one Adam update to `models`. Throws NumericalError
// with a diagnostic if the loss or any gradient is non-finite.
LossReport train_step(ModelPair& models, const Tensor& data, const TrainConfig& config, AdamState& state, Rng& rng);

struct RunOptions {
  std::optional<std::filesystem::path> log_path;         // JSON lines, one per step
  std::optional<std::filesystem::path> checkpoint_path;  // rewritten every `checkpoint_every` steps and at the end
  std::size_t checkpoint_every = 0;                      // 0: only at the end
  std::optional<std::filesystem::path> resume_from;
  bool wall_clock = false;  // record real step durations; otherwise time_ms is 0 so logs are reproducible
  std::vector<std::pair<std::string, Tensor>> checkpoint_extras;  // stored alongside the models
};

struct RunResult {
  ModelPair models;
  AdamState optimizer;
  std::vector<LossReport> reports;
  std::uint64_t start_step = 0;
};

// Step s draws its batches from Rng::stream(seed, s), so a run resumed from a
// checkpoint replays the same losses as an uninterrupted one.
RunResult train_run(const TrainConfig& config, const ModelPair& initial, const Tensor& data,
                    const RunOptions& options = {});

std::string to_json_line(const LossReport& report);

}  // namespace wvi

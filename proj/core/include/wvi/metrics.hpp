#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wvi/costs.hpp"
#include "wvi/models.hpp"
#include "wvi/random.hpp"
#include "wvi/trainer.hpp"

namespace wvi {

// z ~ N(0, I), x ~ p(x | z), z_hat = h(x); mean of ||z - z_hat||^2 / D_z.
double latent_error(const ModelPair& models, std::size_t n_eval, Rng& rng);
// Mean over rows of the per-pixel squared error of g(h(x)).
double reconstruction_error(const ModelPair& models, const Tensor& validation);
// x = g(z), z ~ N(0, I); mean over samples of min_v ||x - v||^2 / D_x across validation rows.
double sample_quality(const ModelPair& models, const Tensor& validation, std::size_t n_gen, Rng& rng);
// Per-row nearest squared distance from each row of `samples` to `reference`, divided by D.
std::vector<double> nearest_sq_distance(const Tensor& samples, const Tensor& reference);

struct MetricReport {
  std::string run_id;
  WeightVector weights;
  double latent = 0.0;
  double observable = 0.0;
  double sample = 0.0;
  std::uint64_t seed = 0;
};

struct EvalOptions {
  std::size_t n_latent = 1000;
  std::size_t n_gen = 200;
};

MetricReport evaluate(const ModelPair& models, const Tensor& validation, const EvalOptions& options,
                      std::uint64_t seed, const std::string& run_id, const WeightVector& weights);

std::string metric_csv_header();  // run_id,w1,...,w5,latent,observable,sample,seed
std::string to_csv_row(const MetricReport& report);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single run
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
};

// Values are sorted before reduction so the result is independent of run order.
Stat summarize(std::vector<double> values);

struct RunFailure {
  std::string run_id;
  std::string message;
};

struct PerturbationSummary {
  std::vector<MetricReport> runs;  // successful runs only
  std::vector<RunFailure> failures;
  Stat latent;
  Stat observable;
  Stat sample;
};

struct PerturbationConfig {
  TrainConfig train;  // train.cost.weights marks the active terms (> 0)
  ModelConfig model;
  EvalOptions eval;
  std::size_t runs = 3;
  std::uint64_t master_seed = 0;
  // When false every run reuses master_seed for initialization and training, so
  // only the weight draw differs.
  bool vary_seed = true;
  // When false weights are kept at train.cost.weights.
  bool draw_weights = true;
};

// Called after each run with its index; lets callers log progress.
using RunCallback = std::function<void(std::size_t, const std::optional<MetricReport>&)>;

// Each run: draw active weights from U[0.1, 1], initialize fresh models, train,
// evaluate. Failed runs are recorded and excluded from the statistics.
PerturbationSummary perturbation_harness(const PerturbationConfig& config, const Tensor& train,
                                          const Tensor& validation, const RunCallback& on_run = {});

// Table-style summary: header, one row per run, one aggregate row.
std::string summary_table(const PerturbationSummary& summary);

}  // namespace wvi

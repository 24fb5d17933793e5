#include "wvi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "wvi/error.hpp"

namespace wvi {

namespace {

double mean_sq_rows(const Tensor& a, const Tensor& b) {
  const auto av = a.values();
  const auto bv = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  return s / static_cast<double>(av.size());
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

double latent_error(const ModelPair& models, std::size_t n_eval, Rng& rng) {
  if (n_eval == 0) throw std::invalid_argument("latent_error: n_eval must be positive");
  const JointBatch p = sample_joint_p(models, n_eval, rng);
  return mean_sq_rows(p.z, encoder_mean(models, p.x));
}

double reconstruction_error(const ModelPair& models, const Tensor& validation) {
  if (validation.rank() != 2 || validation.rows() == 0) {
    throw std::invalid_argument("reconstruction_error: validation set is empty");
  }
  return mean_sq_rows(validation, decoder_mean(models, encoder_mean(models, validation)));
}

std::vector<double> nearest_sq_distance(const Tensor& samples, const Tensor& reference) {
  if (samples.rank() != 2 || reference.rank() != 2 || samples.cols() != reference.cols()) {
    throw ShapeError("nearest neighbour: samples " + to_string(samples.shape()) + " and reference " +
                     to_string(reference.shape()) + " must share a row dimension");
  }
  if (reference.rows() == 0) throw std::invalid_argument("nearest neighbour: reference set is empty");
  const std::size_t d = samples.cols();
  const auto sv = samples.values();
  const auto rv = reference.values();
  std::vector<double> out(samples.rows());
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    const double* s = sv.data() + i * d;
    for (std::size_t j = 0; j < reference.rows(); ++j) {
      const double* r = rv.data() + j * d;
      double acc = 0.0;
      for (std::size_t k = 0; k < d && acc < best; ++k) {
        const double diff = s[k] - r[k];
        acc += diff * diff;
      }
      best = std::min(best, acc);
    }
    out[i] = best / static_cast<double>(d);
  }
  return out;
}

double sample_quality(const ModelPair& models, const Tensor& validation, std::size_t n_gen, Rng& rng) {
  if (n_gen == 0) throw std::invalid_argument("sample_quality: n_gen must be positive");
  std::vector<double> z(n_gen * models.latent_dim());
  for (auto& v : z) v = rng.normal();
  const Tensor x = decoder_mean(models, Tensor::matrix(n_gen, models.latent_dim(), std::move(z)));
  const auto nn = nearest_sq_distance(x, validation);
  return std::accumulate(nn.begin(), nn.end(), 0.0) / static_cast<double>(nn.size());
}

MetricReport evaluate(const ModelPair& models, const Tensor& validation, const EvalOptions& options,
                      std::uint64_t seed, const std::string& run_id, const WeightVector& weights) {
  MetricReport r;
  r.run_id = run_id;
  r.weights = weights;
  r.seed = seed;
  Rng latent_rng = Rng::stream(seed, 101);
  Rng sample_rng = Rng::stream(seed, 102);
  r.latent = latent_error(models, options.n_latent, latent_rng);
  r.observable = reconstruction_error(models, validation);
  r.sample = sample_quality(models, validation, options.n_gen, sample_rng);
  return r;
}

std::string metric_csv_header() { return "run_id,w1,w2,w3,w4,w5,latent,observable,sample,seed"; }

std::string to_csv_row(const MetricReport& r) {
  std::ostringstream os;
  os << r.run_id;
  for (std::size_t i = 0; i < 5; ++i) os << ',' << fmt(r.weights[i]);
  os << ',' << fmt(r.latent) << ',' << fmt(r.observable) << ',' << fmt(r.sample) << ',' << r.seed;
  return os.str();
}

Stat summarize(std::vector<double> values) {
  Stat s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  s.min = values.front();
  s.max = values.back();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  if (s.min == s.max) {
    s.mean = s.min;
  } else if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  // Rounding can put a mean of identical values a hair outside [min, max].
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

PerturbationSummary perturbation_harness(const PerturbationConfig& config, const Tensor& train,
                                          const Tensor& validation, const RunCallback& on_run) {
  if (config.runs < 2) throw ConfigError("perturb: runs must be >= 2");
  config.train.validate();
  config.model.validate();
  PerturbationSummary out;
  for (std::size_t i = 0; i < config.runs; ++i) {
    const std::uint64_t seed = config.vary_seed ? splitmix64(config.master_seed + i) : config.master_seed;
    const std::string run_id = "run" + std::to_string(i);
    TrainConfig tc = config.train;
    tc.seed = seed;
    if (config.draw_weights) {
      Rng wrng = Rng::stream(seed, 201);
      for (std::size_t k = 0; k < 5; ++k)
        if (config.train.cost.weights[k] > 0) tc.cost.weights[k] = wrng.uniform(0.1, 1.0);
    }
    try {
      Rng init = Rng::stream(seed, 202);
      const ModelPair initial = ModelPair::create(config.model, train.cols(), init);
      const RunResult run = train_run(tc, initial, train);
      MetricReport report = evaluate(run.models, validation, config.eval, seed, run_id, tc.cost.weights);
      out.runs.push_back(report);
      if (on_run) on_run(i, report);
    } catch (const std::exception& e) {
      out.failures.push_back({run_id, e.what()});
      if (on_run) on_run(i, std::nullopt);
    }
  }
  std::vector<double> lat, obs, smp;
  for (const auto& r : out.runs) {
    lat.push_back(r.latent);
    obs.push_back(r.observable);
    smp.push_back(r.sample);
  }
  out.latent = summarize(lat);
  out.observable = summarize(obs);
  out.sample = summarize(smp);
  return out;
}

std::string summary_table(const PerturbationSummary& s) {
  std::ostringstream os;
  os << metric_csv_header() << '\n';
  for (const auto& r : s.runs) os << to_csv_row(r) << '\n';
  auto cell = [](const Stat& st) {
    return fmt(st.mean) + " +- " + fmt(st.std) + " [" + fmt(st.min) + ", " + fmt(st.max) + "]";
  };
  os << "summary,,,,,," << cell(s.latent) << ',' << cell(s.observable) << ',' << cell(s.sample) << ','
     << s.runs.size() << " ok/" << s.failures.size() << " failed\n";
  return os.str();
}

}  // namespace wvi

#include "wvi/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wvi/checkpoint.hpp"
#include "wvi/error.hpp"

namespace wvi {

SinkhornConfig LossOptions::sinkhorn() const {
  SinkhornConfig cfg;
  cfg.epsilon = epsilon;
  cfg.iterations = iterations;
  cfg.offset_kernel = offset_kernel;
  cfg.log_domain = log_domain;
  return cfg;
}

namespace {

double plan_dot(const Tensor& plan, const Tensor& cost) {
  const auto p = plan.values();
  const auto c = cost.values();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * c[i];
  return s;
}

}  // namespace

LossValue wasserstein_loss(const JointBatch& a, const JointBatch& b, const CostFunctionalSpec& spec,
                           const ModelPair& models, const LossOptions& options) {
  if (a.size() != b.size()) {
    throw ShapeError("loss: batches must have equal size, got " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  const TotalCost total = assemble_total_cost_matrix(a, b, spec, models);
  LossValue out;
  Tensor value = total.separable;
  const auto& w = spec.weights;
  for (std::size_t i = 0; i < 5; ++i) out.components[i] = w[i] * total.separable_parts[i].item();

  if (total.transport_active) {
    const Tensor& c = total.matrix;
    const auto cv = c.values();
    out.cost_min = *std::min_element(cv.begin(), cv.end());
    out.cost_max = *std::max_element(cv.begin(), cv.end());
    if (!all_finite(cv)) {
      std::ostringstream os;
      os << "loss: cost matrix has non-finite entries (range [" << out.cost_min << ", " << out.cost_max
         << "], epsilon=" << options.epsilon << ")";
      throw NumericalError(os.str());
    }
    const auto wa = uniform_weights(a.size());
    const auto wb = uniform_weights(b.size());
    SinkhornResult sr;
    if (options.normalize_cost && out.cost_max > 0.0) {
      const Tensor scale = reduce(ReduceKind::max, c);
      out.cost_scale = scale.item();
      sr = sinkhorn(c / scale, wa, wb, options.sinkhorn());
      value = value + sr.value * scale;
    } else {
      sr = sinkhorn(c, wa, wb, options.sinkhorn());
      value = value + sr.value;
    }
    for (std::size_t i = 0; i < 4; ++i) {
      if (total.coupled[i].rank() == 2) out.components[i] += w[i] * plan_dot(sr.coupling.plan, total.coupled[i]);
    }
    out.coupling = std::move(sr.coupling);
  }
  out.value = value;
  return out;
}

Tensor mc_wasserstein_loss(const JointBatch& a, const JointBatch& b, const CostFunctionalSpec& spec,
                           const ModelPair& models, const LossOptions& options) {
  return wasserstein_loss(a, b, spec, models, options).value;
}

DebiasedLoss debiased_loss(const JointBatch& p, const JointBatch& q, const JointBatch& p2, const JointBatch& q2,
                           const CostFunctionalSpec& spec, const ModelPair& models, const LossOptions& options) {
  LossValue cross = wasserstein_loss(p, q, spec, models, options);
  const Tensor self_p = mc_wasserstein_loss(p, p2, spec, models, options);
  const Tensor self_q = mc_wasserstein_loss(q, q2, spec, models, options);
  Tensor raw = cross.value;
  return {raw, raw - (self_p + self_q) * 0.5, std::move(cross)};
}

DebiasedLoss debiased_loss(const JointBatch& p, const JointBatch& q, const CostFunctionalSpec& spec,
                           const ModelPair& models, const LossOptions& options) {
  return debiased_loss(p, q, p, q, spec, models, options);
}

void TrainConfig::validate() const {
  cost.validate();
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("train: epsilon must be positive");
  if (sinkhorn_t < 1) throw ConfigError("train: sinkhorn iterations must be >= 1");
  if (batch_n < 2) throw ConfigError("train: batch size must be >= 2");
  if (!(adam.learning_rate >= 0.0)) throw ConfigError("train: learning rate must be non-negative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("train: Adam epsilon must be positive");
}

namespace {

std::string components_text(const std::array<double, 5>& c) {
  std::ostringstream os;
  for (std::size_t i = 0; i < 5; ++i) os << (i ? ", " : "") << "w" << i + 1 << "=" << c[i];
  return os.str();
}

}  // namespace

LossReport train_step(ModelPair& models, const Tensor& data, const TrainConfig& config, AdamState& state, Rng& rng) {
  const auto t0 = std::chrono::steady_clock::now();
  Tape tape;
  const ModelPair tracked = models.on_tape(tape);
  const LossOptions opts = config.loss_options();
  const std::size_t n = config.batch_n;

  const JointBatch p = sample_joint_p(tracked, n, rng);
  const JointBatch q = sample_joint_q(tracked, n, data, rng);

  LossReport report;
  Tensor objective;
  LossValue cross;
  if (config.debias) {
    const JointBatch p2 = sample_joint_p(tracked, n, rng);
    const JointBatch q2 = sample_joint_q(tracked, n, data, rng);
    DebiasedLoss dl = debiased_loss(p, q, p2, q2, config.cost, tracked, opts);
    report.loss = dl.raw.item();
    report.debiased_loss = dl.debiased.item();
    objective = dl.debiased;
    cross = std::move(dl.cross);
  } else {
    cross = wasserstein_loss(p, q, config.cost, tracked, opts);
    report.loss = cross.value.item();
    report.debiased_loss = report.loss;
    objective = cross.value;
  }
  report.components = cross.components;
  report.cost_scale = cross.cost_scale;

  if (!std::isfinite(report.loss) || !std::isfinite(report.debiased_loss)) {
    std::ostringstream os;
    os << "non-finite loss at step " << state.step << ": loss=" << report.loss
       << ", debiased=" << report.debiased_loss << "; components " << components_text(cross.components)
       << "; epsilon=" << config.epsilon << "; cost matrix range [" << cross.cost_min << ", " << cross.cost_max
       << "]";
    throw NumericalError(os.str());
  }

  auto named = tracked.parameters();
  std::vector<Tensor> grads;
  if (objective.tracked()) {
    const Gradients g = tape.backward(objective);
    for (const auto& [name, param] : named) {
      Tensor grad = g.of(*param);
      if (!all_finite(grad.values())) {
        throw NumericalError("non-finite gradient for " + name + " at step " + std::to_string(state.step) +
                             "; epsilon=" + std::to_string(config.epsilon) + "; cost matrix range [" +
                             std::to_string(cross.cost_min) + ", " + std::to_string(cross.cost_max) + "]");
      }
      grads.push_back(std::move(grad));
    }
  } else {
    for (const auto& [name, param] : named) grads.push_back(Tensor::zeros(param->shape()));
  }
  report.tape_nodes = tape.size();

  auto params = models.parameters();
  std::vector<Tensor*> ptrs;
  for (auto& [name, param] : params) ptrs.push_back(param);
  adam_step(ptrs, grads, state, config.adam);

  report.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string to_json_line(const LossReport& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["loss"] = r.loss;
  j["debiased_loss"] = r.debiased_loss;
  nlohmann::ordered_json comps;
  for (std::size_t i = 0; i < 5; ++i) comps["w" + std::to_string(i + 1)] = r.components[i];
  j["components"] = comps;
  j["time_ms"] = r.time_ms;
  return j.dump();
}

namespace {

void write_checkpoint(const std::filesystem::path& path, const RunResult& run, std::uint64_t next_step,
                      const RunOptions& options) {
  Checkpoint ckpt;
  for (const auto& [name, value] : options.checkpoint_extras) ckpt.put(name, value);
  store_models(ckpt, run.models);
  store_optimizer(ckpt, run.models, run.optimizer);
  ckpt.put("train.step", Tensor(static_cast<double>(next_step)));
  ckpt.save(path);
}

}  // namespace

RunResult train_run(const TrainConfig& config, const ModelPair& initial, const Tensor& data,
                    const RunOptions& options) {
  config.validate();
  initial.validate();
  RunResult run;
  run.models = initial;
  if (options.resume_from) {
    const Checkpoint ckpt = Checkpoint::load(*options.resume_from);
    run.models = restore_models(ckpt);
    run.optimizer = restore_optimizer(ckpt, run.models);
    if (ckpt.has("train.step")) run.start_step = static_cast<std::uint64_t>(ckpt.get("train.step").item());
  }
  if (data.rank() != 2 || data.cols() != run.models.observable_dim()) {
    throw ShapeError("train: data of shape " + to_string(data.shape()) + " does not match observable dimension " +
                     std::to_string(run.models.observable_dim()));
  }

  std::ofstream log;
  if (options.log_path) {
    log.open(*options.log_path, run.start_step > 0 ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("train: cannot open log " + options.log_path->string());
  }

  const std::uint64_t total = config.total_steps();
  for (std::uint64_t s = run.start_step; s < total; ++s) {
    Rng rng = Rng::stream(config.seed, s);
    LossReport report = train_step(run.models, data, config, run.optimizer, rng);
    report.step = s;
    report.epoch = config.steps_per_epoch ? s / config.steps_per_epoch : 0;
    if (!options.wall_clock) report.time_ms = 0.0;
    if (log.is_open()) {
      log << to_json_line(report) << '\n';
      if (!log) throw IoError("train: write to " + options.log_path->string() + " failed");
    }
    run.reports.push_back(report);
    if (options.checkpoint_path && options.checkpoint_every > 0 && (s + 1) % options.checkpoint_every == 0 &&
        s + 1 < total) {
      write_checkpoint(*options.checkpoint_path, run, s + 1, options);
    }
  }
  if (options.checkpoint_path) write_checkpoint(*options.checkpoint_path, run, std::max(total, run.start_step), options);
  return run;
}

}  // namespace wvi

#include "wvi/costs.hpp"

#include <cmath>
#include <sstream>

#include "wvi/error.hpp"

namespace wvi {

std::string to_string(FKind kind) {
  switch (kind) {
    case FKind::none: return "none";
    case FKind::reverse_kl: return "reverse_kl";
    case FKind::forward_kl: return "forward_kl";
  }
  return "?";
}

FKind parse_f_kind(const std::string& name) {
  if (name == "none") return FKind::none;
  if (name == "reverse_kl") return FKind::reverse_kl;
  if (name == "forward_kl") return FKind::forward_kl;
  throw ConfigError("unknown f kind '" + name + "' (expected none, reverse_kl or forward_kl)");
}

WeightVector WeightVector::parse(const std::string& text) {
  WeightVector out;
  std::stringstream ss(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 5) throw ConfigError("weights: expected 5 comma-separated values, got more in '" + text + "'");
    std::size_t used = 0;
    try {
      out.w[i] = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("weights: '" + item + "' is not a number");
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size()) throw ConfigError("weights: '" + item + "' is not a number");
    ++i;
  }
  if (i != 5) throw ConfigError("weights: expected 5 comma-separated values in '" + text + "'");
  out.validate();
  return out;
}

bool WeightVector::transport_active() const { return w[0] > 0 || w[1] > 0 || w[2] > 0 || w[3] > 0; }

void WeightVector::validate() const {
  bool any = false;
  for (std::size_t i = 0; i < 5; ++i) {
    if (!std::isfinite(w[i]) || w[i] < 0) {
      throw ConfigError("weights: w" + std::to_string(i + 1) + " = " + std::to_string(w[i]) +
                        " must be finite and non-negative");
    }
    any = any || w[i] > 0;
  }
  if (!any) throw ConfigError("weights: at least one weight must be positive");
}

std::string WeightVector::str() const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < 5; ++i) os << (i ? "," : "") << w[i];
  return os.str();
}

void CostFunctionalSpec::validate() const {
  weights.validate();
  if ((f_kind == FKind::none) != (weights[4] == 0.0)) {
    throw ConfigError("cost spec: f kind '" + to_string(f_kind) + "' is inconsistent with w5 = " +
                      std::to_string(weights[4]) + " (w5 must be 0 exactly when the f kind is none)");
  }
}

Tensor pullback_cost(const Tensor& z1, const Tensor& z2, const Mapping& decoder, Metric metric) {
  return pairwise_distance(decoder(z1), decoder(z2), metric);
}

Tensor latent_ae_cost(const Tensor& x1, const Tensor& z1, const Tensor& x2, const Tensor& z2, const Mapping& encoder,
                      Metric metric) {
  return pairwise_distance(z1 - encoder(x1), z2 - encoder(x2), metric);
}

Tensor observable_ae_cost(const Tensor& x1, const Tensor& z1, const Tensor& x2, const Tensor& z2,
                          const Mapping& decoder, Metric metric) {
  return pairwise_distance(x1 - decoder(z1), x2 - decoder(z2), metric);
}

namespace {

void check_log_pair(const Tensor& log_p, const Tensor& log_q) {
  if (log_p.shape() != log_q.shape() || log_p.rank() != 1) {
    throw ShapeError("f-term: log densities " + to_string(log_p.shape()) + " and " + to_string(log_q.shape()) +
                     " must be matching vectors");
  }
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    if (!std::isfinite(log_p[i]) || !std::isfinite(log_q[i])) {
      throw NumericalError("f-term: non-finite log density at sample " + std::to_string(i) + " (log p = " +
                           std::to_string(log_p[i]) + ", log q = " + std::to_string(log_q[i]) + ")");
    }
  }
}

}  // namespace

Tensor f_integrand(const Tensor& log_p, const Tensor& log_q, FKind kind) {
  check_log_pair(log_p, log_q);
  const Tensor log_r = log_p - log_q;
  switch (kind) {
    case FKind::reverse_kl: return -log_r;
    case FKind::forward_kl: return exp(log_r) * log_r;
    case FKind::none: break;
  }
  throw ConfigError("f-term: f kind 'none' has no integrand (w5 must be 0)");
}

double f_prime_at_one(FKind kind) {
  switch (kind) {
    case FKind::reverse_kl: return -1.0;
    case FKind::forward_kl: return 1.0;
    case FKind::none: break;
  }
  throw ConfigError("f-term: f kind 'none' has no derivative");
}

Tensor centered_f_integrand(const Tensor& log_p, const Tensor& log_q, FKind kind) {
  const Tensor f = f_integrand(log_p, log_q, kind);
  const Tensor r = exp(log_p - log_q);
  return f - (r - 1.0) * f_prime_at_one(kind);
}

Tensor f_divergence_estimate(const Tensor& log_p, const Tensor& log_q, FKind kind) {
  return mean(f_integrand(log_p, log_q, kind));
}

Tensor f_term(const JointBatch& batch_q, const ModelPair& models, FKind kind) {
  if (kind == FKind::none) throw ConfigError("f-term: f kind 'none' requested (w5 must be 0)");
  if (kind == FKind::forward_kl) {
    throw UnsupportedError(
        "f-term: forward_kl needs normalized densities; the joint model's empirical k(x) only allows reverse_kl");
  }
  if (batch_q.origin != Origin::variational_q) throw std::invalid_argument("f-term: batch must be drawn from q");
  const LogDensities ld = log_densities(batch_q, models);
  return f_divergence_estimate(ld.log_p_joint, ld.log_q_conditional, kind);
}

namespace {

bool deterministic_generator(const JointBatch& b, const ModelPair& models) {
  return b.origin == Origin::model_p && models.obs_sigma == 0.0;
}

// Mean of d(0, r_i) over the rows of r.
Tensor mean_norm(const Tensor& r, Metric metric) { return mean(row_norm(r, metric)); }

}  // namespace

TotalCost assemble_total_cost_matrix(const JointBatch& batch_a, const JointBatch& batch_b,
                                     const CostFunctionalSpec& spec, const ModelPair& models) {
  spec.validate();
  batch_a.validate();
  batch_b.validate();
  if (batch_a.size() == 0 || batch_b.size() == 0) throw std::invalid_argument("cost: batches must be non-empty");
  const auto& w = spec.weights;

  TotalCost out;
  for (auto& s : out.separable_parts) s = Tensor(0.0);

  const bool need_decode = w[1] > 0 || w[3] > 0;
  Tensor ga, gb;
  if (need_decode) {
    ga = decoder_mean(models, batch_a.z);
    gb = decoder_mean(models, batch_b.z);
  }

  if (w[0] > 0) out.coupled[0] = pairwise_distance(batch_a.x, batch_b.x, spec.observable_metric);
  if (w[1] > 0) out.coupled[1] = pairwise_distance(ga, gb, spec.observable_metric);
  if (w[2] > 0) {
    out.coupled[2] = pairwise_distance(batch_a.z - encoder_mean(models, batch_a.x),
                                       batch_b.z - encoder_mean(models, batch_b.x), spec.residual_metric);
  }
  if (w[3] > 0) {
    const bool flat_a = deterministic_generator(batch_a, models);
    const bool flat_b = deterministic_generator(batch_b, models);
    if (flat_a && !flat_b) {
      out.separable_parts[3] = mean_norm(batch_b.x - gb, spec.residual_metric);
    } else if (flat_b && !flat_a) {
      out.separable_parts[3] = mean_norm(batch_a.x - ga, spec.residual_metric);
    } else if (!flat_a && !flat_b) {
      out.coupled[3] = pairwise_distance(batch_a.x - ga, batch_b.x - gb, spec.residual_metric);
    }
  }
  if (w[4] > 0 && batch_a.origin != batch_b.origin) {
    const JointBatch& q = batch_a.origin == Origin::variational_q ? batch_a : batch_b;
    out.separable_parts[4] = f_term(q, models, spec.f_kind);
  }

  Tensor matrix;
  bool have = false;
  for (std::size_t i = 0; i < 4; ++i) {
    if (out.coupled[i].rank() != 2) continue;
    const Tensor term = w[i] == 1.0 ? out.coupled[i] : out.coupled[i] * w[i];
    matrix = have ? matrix + term : term;
    have = true;
  }
  out.transport_active = have;
  out.matrix = have ? matrix : Tensor::zeros({batch_a.size(), batch_b.size()});

  Tensor sep(0.0);
  for (std::size_t i = 0; i < 5; ++i) {
    if (w[i] > 0) sep = sep + out.separable_parts[i] * w[i];
  }
  out.separable = sep;
  return out;
}

}  // namespace wvi

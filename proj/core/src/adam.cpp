#include "wvi/adam.hpp"

#include <cmath>

#include "wvi/error.hpp"

namespace wvi {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam: " + std::to_string(params.size()) + " parameters but " + std::to_string(grads.size()) +
                     " gradients");
  }
  if (state.first.empty()) {
    for (const Tensor* p : params) {
      state.first.push_back(Tensor::zeros(p->shape()));
      state.second.push_back(Tensor::zeros(p->shape()));
    }
  }
  if (state.first.size() != params.size() || state.second.size() != params.size()) {
    throw ShapeError("adam: optimizer state holds " + std::to_string(state.first.size()) + " moments for " +
                     std::to_string(params.size()) + " parameters");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (g.size() != p.size() || state.first[i].size() != p.size()) {
      throw ShapeError("adam: parameter " + std::to_string(i) + " has shape " + to_string(p.shape()) +
                       ", gradient " + to_string(g.shape()) + ", moment " + to_string(state.first[i].shape()));
    }
    std::vector<double> m(state.first[i].values().begin(), state.first[i].values().end());
    std::vector<double> v(state.second[i].values().begin(), state.second[i].values().end());
    std::vector<double> w(p.values().begin(), p.values().end());
    const auto gv = g.values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * gv[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * gv[k] * gv[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      w[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    state.first[i] = Tensor(p.shape(), std::move(m));
    state.second[i] = Tensor(p.shape(), std::move(v));
    *params[i] = Tensor(p.shape(), std::move(w));
  }
}

}  // namespace wvi

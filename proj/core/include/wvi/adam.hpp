#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wvi/tensor.hpp"

namespace wvi {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First and second moments, one entry per parameter. Empty until the first step.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> first;
  std::vector<Tensor> second;
};

// One bias-corrected Adam update. `params[i]` is replaced by a new tensor with
// the updated values; gradients must match parameter shapes.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config);

}  // namespace wvi

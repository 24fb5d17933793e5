#pragma once

// Decoder p(z,x) = N(x; g(z), sx^2 I) N(z; 0, I) and encoder
// q(z,x) = N(z; h(x), sz^2 I) k(x), with g and h small ReLU networks.

#include <string>
#include <utility>
#include <vector>

#include "wvi/random.hpp"
#include "wvi/tensor.hpp"

namespace wvi {

class DenseNet {
 public:
  DenseNet() = default;
  // He-uniform weights, zero biases.
  DenseNet(std::vector<std::size_t> layer_sizes, Rng& rng);
  DenseNet(std::vector<std::size_t> layer_sizes, std::vector<Tensor> weights, std::vector<Tensor> biases);

  // ReLU on hidden layers, linear output. x is n x input_dim.
  Tensor operator()(const Tensor& x) const;

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return weights_.size(); }

  // Layer l maps sizes[l] -> sizes[l+1]; weight is (in x out), bias is {out}.
  const Tensor& weight(std::size_t l) const { return weights_[l]; }
  const Tensor& bias(std::size_t l) const { return biases_[l]; }

  // Copy whose parameters are variables on `tape`.
  DenseNet on_tape(Tape& tape) const;
  // weight0, bias0, weight1, ... in that order.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

 private:
  void validate() const;

  std::vector<std::size_t> sizes_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

struct ModelConfig {
  std::size_t latent_dim = 2;
  std::vector<std::size_t> decoder_hidden{64, 128};
  std::vector<std::size_t> encoder_hidden{128, 64};
  double obs_sigma = 0.1;
  double latent_sigma = 0.1;

  void validate() const;
};

struct ModelPair {
  DenseNet decoder;  // g_p: z -> E[x | z]
  DenseNet encoder;  // h_q: x -> E[z | x]
  double obs_sigma = 0.1;
  double latent_sigma = 0.1;

  static ModelPair create(const ModelConfig& config, std::size_t observable_dim, Rng& rng);

  std::size_t latent_dim() const { return decoder.input_dim(); }
  std::size_t observable_dim() const { return decoder.output_dim(); }

  ModelPair on_tape(Tape& tape) const;
  // Named parameters, decoder first: "decoder.<l>.weight", "decoder.<l>.bias", ...
  std::vector<std::pair<std::string, Tensor*>> parameters();
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;
  void validate() const;
};

Tensor decoder_mean(const ModelPair& models, const Tensor& z);
Tensor encoder_mean(const ModelPair& models, const Tensor& x);

enum class Origin { model_p, variational_q };

struct JointBatch {
  Tensor x;  // n x D_x
  Tensor z;  // n x D_z
  Origin origin = Origin::model_p;

  std::size_t size() const { return x.rows(); }
  void validate() const;
};

// z ~ N(0, I), x = g(z) + sx * eta. Noise is drawn before the transform, so x
// carries the decoder's adjoint.
JointBatch sample_joint_p(const ModelPair& models, std::size_t n, Rng& rng);
// x resampled with replacement from the rows of `data`, z = h(x) + sz * eta.
JointBatch sample_joint_q(const ModelPair& models, std::size_t n, const Tensor& data, Rng& rng);

struct LogDensities {
  Tensor log_p_joint;        // {n}: log N(x; g(z), sx^2 I) + log N(z; 0, I)
  Tensor log_q_conditional;  // {n}: log N(z; h(x), sz^2 I)
};

LogDensities log_densities(const JointBatch& batch, const ModelPair& models);

// Row-wise log N(x_i; mean_i, sigma^2 I) as a {n} tensor. mean may be a single row.
Tensor log_normal_rows(const Tensor& x, const Tensor& mean, double sigma);

}  // namespace wvi

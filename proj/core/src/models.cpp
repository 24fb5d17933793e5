#include "wvi/models.hpp"

#include <cmath>
#include <numbers>

#include "wvi/error.hpp"

namespace wvi {

namespace {

std::vector<std::size_t> chain(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

Tensor gaussian_noise(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = rng.normal();
  return Tensor::matrix(rows, cols, std::move(values));
}

}  // namespace

// ---- DenseNet ---------------------------------------------------------------

DenseNet::DenseNet(std::vector<std::size_t> layer_sizes, Rng& rng) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw ShapeError("dense net: needs at least an input and an output size");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    std::vector<double> w(in * out);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    weights_.push_back(Tensor::matrix(in, out, std::move(w)));
    biases_.push_back(Tensor::zeros({out}));
  }
  validate();
}

DenseNet::DenseNet(std::vector<std::size_t> layer_sizes, std::vector<Tensor> weights, std::vector<Tensor> biases)
    : sizes_(std::move(layer_sizes)), weights_(std::move(weights)), biases_(std::move(biases)) {
  validate();
}

void DenseNet::validate() const {
  if (sizes_.size() < 2) throw ShapeError("dense net: needs at least an input and an output size");
  if (weights_.size() + 1 != sizes_.size() || biases_.size() != weights_.size()) {
    throw ShapeError("dense net: " + std::to_string(sizes_.size()) + " layer sizes but " +
                     std::to_string(weights_.size()) + " weights and " + std::to_string(biases_.size()) + " biases");
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Shape want_w{sizes_[l], sizes_[l + 1]};
    const Shape want_b{sizes_[l + 1]};
    if (weights_[l].shape() != want_w || biases_[l].shape() != want_b) {
      throw ShapeError("dense net: layer " + std::to_string(l) + " has weight " + to_string(weights_[l].shape()) +
                       " and bias " + to_string(biases_[l].shape()) + ", expected " + to_string(want_w) + " and " +
                       to_string(want_b));
    }
    if (!all_finite(weights_[l].values()) || !all_finite(biases_[l].values())) {
      throw NumericalError("dense net: layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

Tensor DenseNet::operator()(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != input_dim()) {
    throw ShapeError("dense net: input of shape " + to_string(x.shape()) + " does not match input dimension " +
                     std::to_string(input_dim()));
  }
  Tensor h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = matmul(h, weights_[l]) + biases_[l];
    if (l + 1 < weights_.size()) h = relu(h);
  }
  return h;
}

DenseNet DenseNet::on_tape(Tape& tape) const {
  DenseNet out = *this;
  for (auto& w : out.weights_) w = tape.variable(w);
  for (auto& b : out.biases_) b = tape.variable(b);
  return out;
}

std::vector<Tensor*> DenseNet::parameters() {
  std::vector<Tensor*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::vector<const Tensor*> DenseNet::parameters() const {
  std::vector<const Tensor*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

// ---- ModelPair -----------------------------------------------------------------

void ModelConfig::validate() const {
  if (latent_dim == 0) throw ConfigError("model: latent_dim must be positive");
  if (!(obs_sigma >= 0.0) || !(latent_sigma >= 0.0)) throw ConfigError("model: noise scales must be non-negative");
  for (auto h : decoder_hidden)
    if (h == 0) throw ConfigError("model: decoder hidden sizes must be positive");
  for (auto h : encoder_hidden)
    if (h == 0) throw ConfigError("model: encoder hidden sizes must be positive");
}

ModelPair ModelPair::create(const ModelConfig& config, std::size_t observable_dim, Rng& rng) {
  config.validate();
  if (observable_dim == 0) throw ConfigError("model: observable dimension must be positive");
  ModelPair out;
  out.decoder = DenseNet(chain(config.latent_dim, config.decoder_hidden, observable_dim), rng);
  out.encoder = DenseNet(chain(observable_dim, config.encoder_hidden, config.latent_dim), rng);
  out.obs_sigma = config.obs_sigma;
  out.latent_sigma = config.latent_sigma;
  return out;
}

ModelPair ModelPair::on_tape(Tape& tape) const {
  return {decoder.on_tape(tape), encoder.on_tape(tape), obs_sigma, latent_sigma};
}

std::vector<std::pair<std::string, Tensor*>> ModelPair::parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  auto add = [&out](const std::string& prefix, DenseNet& net) {
    auto ps = net.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      out.emplace_back(prefix + "." + std::to_string(i / 2) + (i % 2 == 0 ? ".weight" : ".bias"), ps[i]);
    }
  };
  add("decoder", decoder);
  add("encoder", encoder);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelPair::parameters() const {
  auto mutable_params = const_cast<ModelPair*>(this)->parameters();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_params.size());
  for (auto& [name, p] : mutable_params) out.emplace_back(name, p);
  return out;
}

void ModelPair::validate() const {
  if (encoder.input_dim() != decoder.output_dim() || encoder.output_dim() != decoder.input_dim()) {
    throw ShapeError("model pair: decoder maps " + std::to_string(decoder.input_dim()) + " -> " +
                     std::to_string(decoder.output_dim()) + " but encoder maps " + std::to_string(encoder.input_dim()) +
                     " -> " + std::to_string(encoder.output_dim()));
  }
  if (!(obs_sigma >= 0.0) || !(latent_sigma >= 0.0)) throw ConfigError("model pair: noise scales must be non-negative");
}

Tensor decoder_mean(const ModelPair& models, const Tensor& z) { return models.decoder(z); }
Tensor encoder_mean(const ModelPair& models, const Tensor& x) { return models.encoder(x); }

// ---- sampling ---------------------------------------------------------------------

void JointBatch::validate() const {
  if (x.rank() != 2 || z.rank() != 2 || x.shape()[0] != z.shape()[0]) {
    throw ShapeError("joint batch: x " + to_string(x.shape()) + " and z " + to_string(z.shape()) +
                     " must be matrices with matching rows");
  }
}

JointBatch sample_joint_p(const ModelPair& models, std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("sample_joint_p: n must be >= 1");
  const Tensor z = gaussian_noise(n, models.latent_dim(), rng);
  const Tensor eta = gaussian_noise(n, models.observable_dim(), rng);
  Tensor x = decoder_mean(models, z);
  if (models.obs_sigma > 0.0) x = x + eta * models.obs_sigma;
  return {x, z, Origin::model_p};
}

JointBatch sample_joint_q(const ModelPair& models, std::size_t n, const Tensor& data, Rng& rng) {
  if (data.rank() != 2 || data.shape()[0] == 0) {
    throw std::invalid_argument("sample_joint_q: dataset is empty");
  }
  if (data.shape()[1] != models.observable_dim()) {
    throw ShapeError("sample_joint_q: data rows have dimension " + std::to_string(data.shape()[1]) +
                     ", model expects " + std::to_string(models.observable_dim()));
  }
  if (n == 0) throw std::invalid_argument("sample_joint_q: n must be >= 1");
  const std::size_t d = data.shape()[1];
  std::vector<double> rows;
  rows.reserve(n * d);
  const auto dv = data.values();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = rng.index(data.shape()[0]);
    rows.insert(rows.end(), dv.begin() + static_cast<std::ptrdiff_t>(idx * d),
                dv.begin() + static_cast<std::ptrdiff_t>((idx + 1) * d));
  }
  const Tensor x = Tensor::matrix(n, d, std::move(rows));
  const Tensor eta = gaussian_noise(n, models.latent_dim(), rng);
  Tensor z = encoder_mean(models, x);
  if (models.latent_sigma > 0.0) z = z + eta * models.latent_sigma;
  return {x, z, Origin::variational_q};
}

// ---- densities ----------------------------------------------------------------------

Tensor log_normal_rows(const Tensor& x, const Tensor& mean, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("log density: sigma must be positive, got " + std::to_string(sigma));
  if (x.rank() != 2) throw ShapeError("log density: expected a matrix, got " + to_string(x.shape()));
  const double d = static_cast<double>(x.shape()[1]);
  const double norm = -0.5 * d * std::log(2.0 * std::numbers::pi * sigma * sigma);
  return sum(square(x - mean), 1) * (-0.5 / (sigma * sigma)) + norm;
}

LogDensities log_densities(const JointBatch& batch, const ModelPair& models) {
  batch.validate();
  const Tensor prior_mean = Tensor::zeros({1, models.latent_dim()});
  Tensor log_p = log_normal_rows(batch.x, decoder_mean(models, batch.z), models.obs_sigma) +
                 log_normal_rows(batch.z, prior_mean, 1.0);
  Tensor log_q = log_normal_rows(batch.z, encoder_mean(models, batch.x), models.latent_sigma);
  return {log_p, log_q};
}

}  // namespace wvi

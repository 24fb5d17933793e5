#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <unistd.h>

#include "oracles.hpp"
#include "wvi/checkpoint.hpp"
#include "wvi/data.hpp"
#include "wvi/error.hpp"
#include "wvi/models.hpp"

using namespace wvi;
using wvi::testing::mean_of;
using wvi::testing::std_error;

namespace fs = std::filesystem;

namespace {

Tensor random_matrix(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<double> v(n * d);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return Tensor::matrix(n, d, std::move(v));
}

ModelPair small_models(std::uint64_t seed, double sx = 0.1, double sz = 0.1) {
  ModelConfig mc;
  mc.latent_dim = 2;
  mc.decoder_hidden = {6, 5};
  mc.encoder_hidden = {5};
  mc.obs_sigma = sx;
  mc.latent_sigma = sz;
  Rng rng(seed);
  return ModelPair::create(mc, 4, rng);
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("wvi_test_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(DenseNet, ZeroWeightsGiveBias) {
  const DenseNet net({3, 2}, {Tensor::zeros({3, 2})}, {Tensor::vector({0.5, -1})});
  const Tensor out = net(Tensor::matrix({{1, 2, 3}, {4, 5, 6}}));
  EXPECT_EQ(out.row(0), (std::vector<double>{0.5, -1}));
  EXPECT_EQ(out.row(1), (std::vector<double>{0.5, -1}));
}

TEST(DenseNet, IdentityLayer) {
  const DenseNet net({3, 3}, {Tensor::identity(3)}, {Tensor::zeros({3})});
  const Tensor x = Tensor::matrix({{1, -2, 3}});
  EXPECT_EQ(net(x).row(0), x.row(0));
}

TEST(DenseNet, MatchesLayerLoop) {
  Rng rng(1);
  const DenseNet net({3, 4, 2}, rng);
  const Tensor x = random_matrix(5, 3, rng);
  const Tensor out = net(x);
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<double> h = x.row(i);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const Tensor& w = net.weight(l);
      std::vector<double> next(w.cols());
      for (std::size_t o = 0; o < w.cols(); ++o) {
        double s = net.bias(l)[o];
        for (std::size_t k = 0; k < w.rows(); ++k) s += h[k] * w.at(k, o);
        next[o] = l + 1 < net.num_layers() ? std::max(s, 0.0) : s;
      }
      h = next;
    }
    for (std::size_t o = 0; o < 2; ++o) EXPECT_NEAR(out.at(i, o), h[o], 1e-12);
  }
}

TEST(DenseNet, ShapeErrors) {
  Rng rng(2);
  const DenseNet net({3, 2}, rng);
  EXPECT_THROW(net(Tensor::zeros({2, 4})), ShapeError);
  EXPECT_THROW(DenseNet({3, 2}, {Tensor::zeros({2, 3})}, {Tensor::zeros({2})}), ShapeError);
}

TEST(Sampling, DeterministicGenerator) {
  const ModelPair m = small_models(3, 0.0);
  Rng rng(4);
  const JointBatch p = sample_joint_p(m, 7, rng);
  const Tensor mean = decoder_mean(m, p.z);
  for (std::size_t i = 0; i < p.x.size(); ++i) EXPECT_EQ(p.x[i], mean[i]);
  EXPECT_EQ(p.origin, Origin::model_p);
}

TEST(Sampling, PriorMeanWithinThreeStandardErrors) {
  const ModelPair m = small_models(5);
  Rng rng(6);
  const JointBatch p = sample_joint_p(m, 100000, rng);
  for (std::size_t d = 0; d < 2; ++d) {
    std::vector<double> col;
    for (std::size_t i = 0; i < p.size(); ++i) col.push_back(p.z.at(i, d));
    EXPECT_LE(std::abs(mean_of(col)), 3 * std_error(col));
  }
}

TEST(Sampling, FixedSeedIsReproducible) {
  const ModelPair m = small_models(7);
  const Tensor data = Tensor::matrix({{0, 0.5, 1, 0.2}, {1, 1, 0, 0}});
  Rng a(8), b(8);
  const JointBatch pa = sample_joint_p(m, 5, a), pb = sample_joint_p(m, 5, b);
  const JointBatch qa = sample_joint_q(m, 5, data, a), qb = sample_joint_q(m, 5, data, b);
  EXPECT_TRUE(std::equal(pa.x.values().begin(), pa.x.values().end(), pb.x.values().begin()));
  EXPECT_TRUE(std::equal(qa.z.values().begin(), qa.z.values().end(), qb.z.values().begin()));
}

TEST(Sampling, VariationalRowsComeFromData) {
  const ModelPair m = small_models(9, 0.1, 0.0);
  const Tensor data = Tensor::matrix({{0, 0.5, 1, 0.2}, {1, 1, 0, 0}, {0.3, 0.3, 0.3, 0.3}});
  Rng rng(10);
  const JointBatch q = sample_joint_q(m, 20, data, rng);
  for (std::size_t i = 0; i < q.size(); ++i) {
    bool found = false;
    for (std::size_t r = 0; r < data.rows(); ++r) found = found || q.x.row(i) == data.row(r);
    EXPECT_TRUE(found);
  }
  const Tensor mean = encoder_mean(m, q.x);
  for (std::size_t i = 0; i < q.z.size(); ++i) EXPECT_EQ(q.z[i], mean[i]);
  EXPECT_THROW(sample_joint_q(m, 3, Tensor::zeros({0, 4}), rng), std::invalid_argument);
}

TEST(Sampling, ReparameterizationGradient) {
  // x = b + sx * eta for a 1-D bias-only decoder: d E[x * c] / db = c.
  const double c = 2.5;
  ModelPair m;
  m.decoder = DenseNet({1, 1}, {Tensor::zeros({1, 1})}, {Tensor::vector({0.3})});
  m.encoder = DenseNet({1, 1}, {Tensor::zeros({1, 1})}, {Tensor::vector({0.0})});
  m.obs_sigma = 0.5;
  Tape tape;
  const ModelPair tracked = m.on_tape(tape);
  Rng rng(11);
  const JointBatch p = sample_joint_p(tracked, 64, rng);
  const Tensor obj = mean(p.x) * c;
  const Gradients g = tape.backward(obj);
  EXPECT_NEAR(g.of(tracked.decoder.bias(0)).item(), c, 1e-12);

  auto value_at = [&](double b) {
    ModelPair shifted = m;
    shifted.decoder = DenseNet({1, 1}, {Tensor::zeros({1, 1})}, {Tensor::vector({b})});
    Rng r(11);
    return mean(sample_joint_p(shifted, 64, r).x).item() * c;
  };
  EXPECT_NEAR((value_at(0.3 + 1e-5) - value_at(0.3 - 1e-5)) / 2e-5, c, 1e-6);
}

TEST(LogDensities, Examples) {
  ModelPair m;
  m.decoder = DenseNet({1, 1}, {Tensor::zeros({1, 1})}, {Tensor::vector({0.7})});
  m.encoder = DenseNet({1, 1}, {Tensor::zeros({1, 1})}, {Tensor::vector({0.0})});
  m.obs_sigma = 1.0;
  m.latent_sigma = 1.0;
  const JointBatch b{Tensor::matrix({{0.7}}), Tensor::matrix({{0.0}}), Origin::model_p};
  const LogDensities ld = log_densities(b, m);
  EXPECT_NEAR(ld.log_p_joint.item(), 2 * std::log(1 / std::sqrt(2 * std::numbers::pi)), 1e-14);
  EXPECT_NEAR(log_normal_rows(Tensor::matrix({{0.0}}), Tensor::matrix({{0.0}}), 1.0).item(),
              -0.5 * std::log(2 * std::numbers::pi), 1e-15);
  EXPECT_THROW(log_normal_rows(Tensor::matrix({{0.0}}), Tensor::matrix({{0.0}}), 0.0), DomainError);
}

TEST(LogDensities, MatchScalarLoop) {
  const ModelPair m = small_models(12);
  Rng rng(13);
  const JointBatch b{random_matrix(5, 4, rng), random_matrix(5, 2, rng), Origin::variational_q};
  const LogDensities ld = log_densities(b, m);
  const Tensor g = decoder_mean(m, b.z);
  const Tensor h = encoder_mean(m, b.x);
  auto log_n = [](double x, double mu, double s) {
    return -0.5 * std::log(2 * std::numbers::pi * s * s) - (x - mu) * (x - mu) / (2 * s * s);
  };
  for (std::size_t i = 0; i < 5; ++i) {
    double lp = 0.0, lq = 0.0;
    for (std::size_t d = 0; d < 4; ++d) lp += log_n(b.x.at(i, d), g.at(i, d), m.obs_sigma);
    for (std::size_t d = 0; d < 2; ++d) {
      lp += log_n(b.z.at(i, d), 0.0, 1.0);
      lq += log_n(b.z.at(i, d), h.at(i, d), m.latent_sigma);
    }
    EXPECT_NEAR(ld.log_p_joint[i], lp, 1e-10);
    EXPECT_NEAR(ld.log_q_conditional[i], lq, 1e-10);
  }
}

TEST(LogDensities, IntegrateToOne) {
  for (double sigma : {0.1, 0.5, 1.0}) {
    const std::size_t n = 20001;
    const double lo = -10 * sigma, step = 20 * sigma / (n - 1);
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) grid[i] = lo + step * static_cast<double>(i);
    const Tensor lp = log_normal_rows(Tensor::matrix(n, 1, grid), Tensor::matrix({{0.0}}), sigma);
    double integral = 0.0;
    for (std::size_t i = 0; i < n; ++i) integral += std::exp(lp[i]) * step * (i == 0 || i + 1 == n ? 0.5 : 1.0);
    EXPECT_NEAR(integral, 1.0, 1e-3);
  }
}

TEST(Checkpoint, RoundTrip) {
  ModelPair m = small_models(14, 0.2, 0.3);
  const fs::path path = temp_path("roundtrip.ckpt");
  Checkpoint ckpt;
  store_models(ckpt, m);
  AdamState state;
  state.step = 3;
  for (const auto& [name, p] : m.parameters()) {
    state.first.push_back(*p * 0.5);
    state.second.push_back(*p * *p);
  }
  store_optimizer(ckpt, m, state);
  ckpt.save(path);

  const Checkpoint loaded = Checkpoint::load(path);
  const ModelPair back = restore_models(loaded);
  EXPECT_EQ(back.obs_sigma, 0.2);
  EXPECT_EQ(back.latent_sigma, 0.3);
  EXPECT_EQ(back.decoder.layer_sizes(), m.decoder.layer_sizes());
  const auto a = m.parameters();
  const auto b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_TRUE(std::equal(a[i].second->values().begin(), a[i].second->values().end(), b[i].second->values().begin()));
  }
  const AdamState s2 = restore_optimizer(loaded, back);
  EXPECT_EQ(s2.step, 3u);
  EXPECT_EQ(s2.second[1].values()[0], state.second[1].values()[0]);
  fs::remove(path);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const fs::path path = temp_path("corrupt.ckpt");
  {
    std::ofstream os(path, std::ios::binary);
    os << "not a checkpoint";
  }
  EXPECT_THROW(Checkpoint::load(path), IoError);

  Checkpoint ckpt;
  store_models(ckpt, small_models(15));
  ckpt.save(path);
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 5);
  EXPECT_THROW(Checkpoint::load(path), IoError);
  EXPECT_THROW(Checkpoint::load(temp_path("missing.ckpt")), IoError);
  fs::remove(path);
}

TEST(Idx, RoundTripPlainAndGzip) {
  IdxImages img;
  img.count = 3;
  img.rows = 4;
  img.cols = 2;
  for (std::size_t i = 0; i < 24; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 10));
  for (const char* name : {"img.idx", "img.idx.gz"}) {
    const fs::path path = temp_path(name);
    write_idx_images(path, img);
    const IdxImages back = read_idx_images(path);
    EXPECT_EQ(back.count, 3u);
    EXPECT_EQ(back.rows, 4u);
    EXPECT_EQ(back.pixels, img.pixels);
    fs::remove(path);
  }
  const Tensor t = to_unit_tensor(img);
  EXPECT_EQ(t.shape(), (Shape{3, 8}));
  EXPECT_DOUBLE_EQ(t.at(2, 7), 230 / 255.0);
}

TEST(Idx, BadMagicShowsBytes) {
  const fs::path path = temp_path("bad.idx");
  {
    std::ofstream os(path, std::ios::binary);
    const char bytes[16] = {0, 0, 8, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    os.write(bytes, 16);
  }
  try {
    read_idx_images(path);
    FAIL();
  } catch (const IoError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("00 00 08 03"), std::string::npos) << msg;
    EXPECT_NE(msg.find("00 00 08 01"), std::string::npos) << msg;
  }
  fs::remove(path);
}

TEST(Idx, Downsample) {
  IdxImages img;
  img.count = 1;
  img.rows = 2;
  img.cols = 4;
  img.pixels = {0, 10, 100, 100, 20, 30, 200, 100};
  const IdxImages d = downsample(img, 2);
  EXPECT_EQ(d.rows, 1u);
  EXPECT_EQ(d.cols, 2u);
  EXPECT_EQ(d.pixels, (std::vector<std::uint8_t>{15, 125}));
  EXPECT_THROW(downsample(img, 3), ShapeError);
}

TEST(Synthetic, DeterministicAndInRange) {
  for (auto kind : {SynthKind::ring8, SynthKind::checkerboard, SynthKind::moons}) {
    const Tensor a = synth_dataset(kind, 500, 3);
    const Tensor b = synth_dataset(kind, 500, 3);
    EXPECT_EQ(a.shape(), (Shape{500, 2}));
    EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
    for (double v : a.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(parse_synth_kind("moons"), SynthKind::moons);
  EXPECT_THROW(parse_synth_kind("spiral"), ConfigError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "wvi/data.hpp"
#include "wvi/error.hpp"
#include "wvi/metrics.hpp"

using namespace wvi;

namespace {

// Linear decoder A z and encoder A^{-1} x, no hidden layers.
ModelPair linear_pair(double obs_sigma) {
  ModelPair m;
  m.decoder = DenseNet({2, 2}, {Tensor::matrix({{2.0, 1.0}, {0.0, 1.0}})}, {Tensor::zeros({2})});
  m.encoder = DenseNet({2, 2}, {Tensor::matrix({{0.5, -0.5}, {0.0, 1.0}})}, {Tensor::zeros({2})});
  m.obs_sigma = obs_sigma;
  m.latent_sigma = 0.1;
  return m;
}

ModelPair zero_encoder_pair() {
  ModelPair m = linear_pair(0.0);
  m.encoder = DenseNet({2, 2}, {Tensor::zeros({2, 2})}, {Tensor::zeros({2})});
  return m;
}

}  // namespace

TEST(LatentError, PerfectInverseIsZero) {
  Rng rng(1);
  EXPECT_NEAR(latent_error(linear_pair(0.0), 500, rng), 0.0, 1e-24);
}

TEST(LatentError, ConstantEncoderScoresPriorVariance) {
  Rng rng(2);
  EXPECT_NEAR(latent_error(zero_encoder_pair(), 20000, rng), 1.0, 0.05);
}

TEST(LatentError, ObservationNoiseRaisesError) {
  Rng a(3), b(3);
  EXPECT_GT(latent_error(linear_pair(0.5), 2000, a), latent_error(linear_pair(0.0), 2000, b));
}

TEST(ReconstructionError, IdentityRoundTripIsZero) {
  const Tensor v = Tensor::matrix({{0.1, 0.2}, {0.3, 0.9}, {1.0, 0.0}});
  EXPECT_NEAR(reconstruction_error(linear_pair(0.1), v), 0.0, 1e-30);
}

TEST(ReconstructionError, ZeroEncoderGivesMeanSquare) {
  const Tensor v = Tensor::matrix({{1.0, 0.0}, {0.0, 3.0}});
  EXPECT_DOUBLE_EQ(reconstruction_error(zero_encoder_pair(), v), 10.0 / 4.0);
}

TEST(NearestNeighbour, MatchesBruteForce) {
  Rng rng(4);
  std::vector<double> s(30 * 3), r(50 * 3);
  for (auto& v : s) v = rng.normal();
  for (auto& v : r) v = rng.normal();
  const Tensor a = Tensor::matrix(30, 3, s), b = Tensor::matrix(50, 3, r);
  const auto d = wvi::testing::loop_distances(a, b, true);
  const auto nn = nearest_sq_distance(a, b);
  for (std::size_t i = 0; i < 30; ++i) {
    const double best = *std::min_element(d.begin() + static_cast<long>(i * 50), d.begin() + static_cast<long>((i + 1) * 50));
    EXPECT_NEAR(nn[i], best / 3.0, 1e-14);
  }
}

TEST(NearestNeighbour, ShapeMismatch) {
  EXPECT_THROW(nearest_sq_distance(Tensor::zeros({2, 2}), Tensor::zeros({2, 3})), ShapeError);
}

TEST(SampleQuality, SamplesOnTheReferenceScoreZero) {
  // Decoder outputs a constant that sits in the reference set.
  ModelPair m = linear_pair(0.0);
  m.decoder = DenseNet({2, 2}, {Tensor::zeros({2, 2})}, {Tensor::vector({0.25, 0.5})});
  Rng rng(5);
  EXPECT_EQ(sample_quality(m, Tensor::matrix({{0.25, 0.5}, {1.0, 1.0}}), 10, rng), 0.0);
}

TEST(Summarize, Example) {
  const Stat s = summarize({3.0, 1.0, 2.0, 10.0});
  EXPECT_DOUBLE_EQ(s.mean, 4.0);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.max, 10.0);
  EXPECT_NEAR(s.std, std::sqrt(50.0 / 3.0), 1e-12);
}

TEST(Summarize, IdenticalValuesHaveZeroSpread) {
  const Stat s = summarize({0.1, 0.1, 0.1});
  EXPECT_EQ(s.std, 0.0);
  EXPECT_EQ(s.mean, 0.1);
}

TEST(Summarize, OrderIndependent) {
  Rng rng(6);
  std::vector<double> v(25);
  for (auto& x : v) x = rng.normal() * 1e3;
  const Stat a = summarize(v);
  std::reverse(v.begin(), v.end());
  const Stat b = summarize(v);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std, b.std);
  EXPECT_LE(a.min, a.mean);
  EXPECT_LE(a.mean, a.max);
}

TEST(CsvRow, Format) {
  MetricReport r;
  r.run_id = "run0";
  r.weights = WeightVector::parse("1,0.5,0,0,0");
  r.latent = 0.25;
  r.observable = 0.125;
  r.sample = 2;
  r.seed = 7;
  EXPECT_EQ(metric_csv_header(), "run_id,w1,w2,w3,w4,w5,latent,observable,sample,seed");
  EXPECT_EQ(to_csv_row(r), "run0,1,0.5,0,0,0,0.25,0.125,2,7");
}

class Harness : public ::testing::Test {
 protected:
  PerturbationConfig config() const {
    PerturbationConfig pc;
    pc.train.cost.weights = WeightVector::parse("1,1,1,1,0");
    pc.train.steps_per_epoch = 5;
    pc.train.batch_n = 8;
    pc.model.decoder_hidden = {8};
    pc.model.encoder_hidden = {8};
    pc.eval.n_latent = 100;
    pc.eval.n_gen = 20;
    pc.runs = 3;
    pc.master_seed = 11;
    return pc;
  }
  Tensor train = synth_dataset(SynthKind::ring8, 200, 1);
  Tensor validation = synth_dataset(SynthKind::ring8, 50, 2);
};

TEST_F(Harness, IdenticalSeedsGiveZeroSpread) {
  PerturbationConfig pc = config();
  pc.vary_seed = false;
  pc.draw_weights = false;
  const PerturbationSummary s = perturbation_harness(pc, train, validation);
  ASSERT_EQ(s.runs.size(), 3u);
  EXPECT_EQ(s.latent.std, 0.0);
  EXPECT_EQ(s.observable.std, 0.0);
  EXPECT_EQ(s.sample.std, 0.0);
}

TEST_F(Harness, StatsBracketEveryRun) {
  const PerturbationSummary s = perturbation_harness(config(), train, validation);
  ASSERT_EQ(s.runs.size(), 3u);
  EXPECT_TRUE(s.failures.empty());
  for (const auto& r : s.runs) {
    EXPECT_LE(s.latent.min, r.latent);
    EXPECT_GE(s.latent.max, r.latent);
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_GE(r.weights[k], 0.1);
      EXPECT_LE(r.weights[k], 1.0);
    }
    EXPECT_EQ(r.weights[4], 0.0);
  }
  EXPECT_GT(s.latent.std, 0.0);
  const std::string table = summary_table(s);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
  EXPECT_NE(table.find("summary,"), std::string::npos);
}

TEST_F(Harness, FailedRunsAreRecorded) {
  PerturbationConfig pc = config();
  pc.train.epsilon = 1e-300;
  const PerturbationSummary s = perturbation_harness(pc, train, validation);
  EXPECT_TRUE(s.runs.empty());
  ASSERT_EQ(s.failures.size(), 3u);
  EXPECT_EQ(s.failures[0].run_id, "run0");
  EXPECT_FALSE(s.failures[0].message.empty());
}

TEST_F(Harness, NeedsTwoRuns) {
  PerturbationConfig pc = config();
  pc.runs = 1;
  EXPECT_THROW(perturbation_harness(pc, train, validation), ConfigError);
}

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "wvi/adam.hpp"
#include "wvi/error.hpp"
#include "wvi/random.hpp"
#include "wvi/tensor.hpp"

using namespace wvi;
using wvi::testing::grad_check;
using wvi::testing::tape_grad;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Uniform in [lo, hi] but at least `gap` away from zero.
Tensor away_from_zero(Shape shape, Rng& rng, double gap) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) {
    do x = rng.uniform(-2.0, 2.0);
    while (std::abs(x) < gap);
  }
  return Tensor(std::move(shape), std::move(v));
}

void expect_values(const Tensor& t, std::vector<double> want, double tol = 1e-12) {
  ASSERT_EQ(t.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t[i], want[i], tol) << "entry " << i;
}

constexpr int kCases = 100;
constexpr double kPropTol = 1e-4;

}  // namespace

TEST(Tensor, ConstructionChecksShape) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(m.shape(), (Shape{2, 2}));
  EXPECT_DOUBLE_EQ(m.at(1, 0), 3.0);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), ShapeError);
}

TEST(BinaryOp, Examples) {
  expect_values(Tensor::vector({1, 2}) + Tensor::vector({3, 4}), {4, 6});
  expect_values(Tensor::vector({2, 5}) / Tensor::vector({2, 5}), {1, 1});
  const auto g = tape_grad([](const Tensor& a) { return sum(a * Tensor::vector({3, 4})); }, Tensor::vector({1, 2}));
  EXPECT_DOUBLE_EQ(g[0], 3.0);
  EXPECT_DOUBLE_EQ(g[1], 4.0);
}

TEST(BinaryOp, Broadcasting) {
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  expect_values(m + 1.0, {2, 3, 4, 5});
  expect_values(m + Tensor::vector({10, 20}), {11, 22, 13, 24});
  expect_values(m * Tensor::matrix(2, 1, {2, 3}), {2, 4, 9, 12});
  expect_values(Tensor::vector({10, 20}) - m, {9, 18, 7, 16});
  EXPECT_THROW(m + Tensor::vector({1, 2, 3}), ShapeError);
}

TEST(BinaryOp, DivisionByTinyNamesIndex) {
  try {
    Tensor::vector({1, 1, 1}) / Tensor::vector({1, 0, 1});
    FAIL() << "expected a domain error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(UnaryOp, Examples) {
  expect_values(exp(Tensor::vector({0})), {1});
  EXPECT_DOUBLE_EQ(tape_grad([](const Tensor& x) { return sum(log(x)); }, Tensor::vector({2}))[0], 0.5);
  expect_values(relu(Tensor::vector({-1, 3})), {0, 3});
  EXPECT_DOUBLE_EQ(tape_grad([](const Tensor& x) { return sum(relu(x)); }, Tensor::vector({0}))[0], 0.0);
}

TEST(UnaryOp, DomainErrorsNameIndexAndValue) {
  try {
    log(Tensor::vector({1, -3}));
    FAIL() << "expected a domain error";
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1"), std::string::npos);
    EXPECT_NE(msg.find("-3"), std::string::npos);
  }
  EXPECT_THROW(sqrt(Tensor::vector({-1})), DomainError);
  EXPECT_NO_THROW(sqrt(Tensor::vector({0})));
}

TEST(Matmul, Examples) {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  expect_values(matmul(Tensor::identity(2), a), {1, 2, 3, 4});
  expect_values(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})), {11});
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("(2,3)"), std::string::npos) << e.what();
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({4, 2}, rng);
  EXPECT_LE(grad_check([&](const Tensor& x) { return sum(matmul(x, b)); }, a), 1e-6);
  EXPECT_LE(grad_check([&](const Tensor& x) { return sum(matmul(a, x)); }, b), 1e-6);
}

TEST(Reduce, Examples) {
  expect_values(sum(Tensor::vector({1, 2, 3})), {6});
  expect_values(mean(Tensor::matrix({{1, 2}, {3, 4}}), 0), {2, 3});
  const auto g = tape_grad([](const Tensor& x) { return mean(x); }, Tensor::vector({1, 2, 3, 4}));
  for (double v : g) EXPECT_DOUBLE_EQ(v, 0.25);
  expect_values(reduce(ReduceKind::min, Tensor::matrix({{3, 1}, {2, 5}}), 1), {1, 2});
  expect_values(reduce(ReduceKind::max, Tensor::matrix({{3, 1}, {2, 5}})), {5});
  EXPECT_THROW(reduce(ReduceKind::sum, Tensor::vector({1}), 1), ShapeError);
}

TEST(Reduce, TrackedMinIsRejected) {
  Tape tape;
  const Tensor x = tape.variable(Tensor::vector({1, 2}));
  EXPECT_THROW(reduce(ReduceKind::min, x), UnsupportedError);
  EXPECT_NO_THROW(reduce(ReduceKind::min, x.detach()));
}

TEST(Backward, Examples) {
  const auto g = tape_grad([](const Tensor& w) { return sum(square(w)); }, Tensor::vector({1, -2}));
  EXPECT_DOUBLE_EQ(g[0], 2.0);
  EXPECT_DOUBLE_EQ(g[1], -4.0);

  Tape tape;
  const Tensor c = tape.constant(Tensor(3.0));
  EXPECT_TRUE(tape.backward(exp(c)).empty());
}

TEST(Backward, Errors) {
  Tape tape;
  const Tensor x = tape.variable(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(x * 2.0), ShapeError);
  EXPECT_THROW(tape.backward(sum(x).detach()), std::invalid_argument);
  Tape other;
  EXPECT_THROW(other.backward(sum(x)), std::invalid_argument);
}

TEST(Backward, UnreachableVariableGetsZeros) {
  Tape tape;
  const Tensor x = tape.variable(Tensor::vector({1, 2}));
  const Tensor y = tape.variable(Tensor::vector({3}));
  const Gradients g = tape.backward(sum(x));
  EXPECT_FALSE(g.contains(y));
  expect_values(g.of(y), {0});
}

TEST(Backward, GradientHasVariableShape) {
  Tape tape;
  const Tensor w = tape.variable(Tensor::matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(tape.backward(sum(w)).of(w).shape(), (Shape{2, 2}));
}

TEST(Tape, LengthAndClear) {
  Tape tape;
  const Tensor x = tape.variable(Tensor::vector({1, 2}));
  const Tensor y = exp(x) * 2.0;
  const Tensor s = sum(y);
  EXPECT_EQ(tape.size(), 4u);  // variable, exp, mul, sum
  (void)s;
  tape.clear();
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_THROW(exp(x), std::logic_error);
}

TEST(Tape, ForwardIsBitIdentical) {
  auto run = [] {
    Rng rng(42);
    const Tensor a = random_tensor({5, 3}, rng);
    const Tensor b = random_tensor({3, 4}, rng);
    const Tensor out = relu(matmul(a, b)) + square(matmul(a, b));
    return std::vector<double>(out.values().begin(), out.values().end());
  };
  EXPECT_EQ(run(), run());
}

// ---- finite-difference properties over random inputs ------------------------

TEST(GradientProperty, BinaryOps) {
  Rng rng(1);
  for (int c = 0; c < kCases; ++c) {
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = away_from_zero({3, 4}, rng, 0.3);
    const Tensor row = away_from_zero({4}, rng, 0.3);
    const Tensor col = away_from_zero({3, 1}, rng, 0.3);
    for (auto kind : {BinaryKind::add, BinaryKind::sub, BinaryKind::mul, BinaryKind::div}) {
      auto weighted = [&](const Tensor& t) { return sum(t * a); };  // non-uniform output adjoint
      EXPECT_LE(grad_check([&](const Tensor& x) { return weighted(binary_op(kind, x, b)); }, a), kPropTol);
      EXPECT_LE(grad_check([&](const Tensor& x) { return weighted(binary_op(kind, a, x)); }, b), kPropTol);
      EXPECT_LE(grad_check([&](const Tensor& x) { return weighted(binary_op(kind, a, x)); }, row), kPropTol);
      EXPECT_LE(grad_check([&](const Tensor& x) { return weighted(binary_op(kind, a, x)); }, col), kPropTol);
      EXPECT_LE(grad_check([&](const Tensor& x) { return weighted(binary_op(kind, a, x)); }, Tensor(b[0])),
                kPropTol);
    }
  }
}

TEST(GradientProperty, UnaryOps) {
  Rng rng(2);
  for (int c = 0; c < kCases; ++c) {
    const Tensor w = random_tensor({2, 3}, rng);
    const Tensor any = random_tensor({2, 3}, rng);
    const Tensor positive = random_tensor({2, 3}, rng, 0.1, 2.0);
    const Tensor nonzero = away_from_zero({2, 3}, rng, 1e-3);
    auto check = [&](UnaryKind kind, const Tensor& x0) {
      EXPECT_LE(grad_check([&](const Tensor& x) { return sum(unary_op(kind, x) * w); }, x0), kPropTol)
          << "kind " << static_cast<int>(kind);
    };
    check(UnaryKind::exp, any);
    check(UnaryKind::neg, any);
    check(UnaryKind::square, any);
    check(UnaryKind::relu, nonzero);
    check(UnaryKind::log, positive);
    check(UnaryKind::sqrt, positive);
  }
}

TEST(GradientProperty, MatmulReduceStructural) {
  Rng rng(3);
  for (int c = 0; c < kCases; ++c) {
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({4, 2}, rng);
    const Tensor w2 = random_tensor({3, 2}, rng);
    EXPECT_LE(grad_check([&](const Tensor& x) { return sum(matmul(x, b) * w2); }, a), kPropTol);
    EXPECT_LE(grad_check([&](const Tensor& x) { return sum(matmul(a, x) * w2); }, b), kPropTol);
    EXPECT_LE(grad_check([&](const Tensor& x) { return sum(square(transpose(x))); }, a), kPropTol);
    EXPECT_LE(grad_check([&](const Tensor& x) { return sum(square(sum(x, 0))); }, a), kPropTol);
    EXPECT_LE(grad_check([&](const Tensor& x) { return sum(square(mean(x, 1))); }, a), kPropTol);
    EXPECT_LE(grad_check([&](const Tensor& x) { return reduce(ReduceKind::max, x) * 3.0; }, a), kPropTol);
    EXPECT_LE(grad_check([&](const Tensor& x) { return sum(square(reshape(x, {2, 6})) * 0.5); }, a), kPropTol);
    EXPECT_LE(grad_check([&](const Tensor& x) { return sum(square(slice_rows(x, 1, 3))); }, a), kPropTol);
  }
}

TEST(GradientProperty, PairwiseDistances) {
  Rng rng(4);
  for (int c = 0; c < kCases; ++c) {
    const Tensor a = random_tensor({3, 2}, rng);
    const Tensor b = random_tensor({4, 2}, rng);
    const Tensor w = random_tensor({3, 4}, rng);
    for (auto metric : {Metric::euclidean, Metric::squared_euclidean}) {
      EXPECT_LE(grad_check([&](const Tensor& x) { return sum(pairwise_distance(x, b, metric) * w); }, a), kPropTol);
      EXPECT_LE(grad_check([&](const Tensor& x) { return sum(pairwise_distance(a, x, metric) * w); }, b), kPropTol);
      EXPECT_LE(grad_check([&](const Tensor& x) { return sum(row_norm(x, metric)); }, a), kPropTol);
    }
  }
}

TEST(PairwiseDistance, MatchesLoopAndZeroDistanceAdjoint) {
  Rng rng(5);
  const Tensor a = random_tensor({4, 3}, rng);
  const Tensor b = random_tensor({5, 3}, rng);
  const auto want = wvi::testing::loop_distances(a, b, false);
  expect_values(pairwise_distance(a, b, Metric::euclidean), want, 1e-12);
  const auto g = tape_grad([&](const Tensor& x) { return sum(pairwise_distance(x, x, Metric::euclidean)); },
                           Tensor::matrix({{1, 1}}));
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(parse_metric("sqeuclidean"), Metric::squared_euclidean);
  EXPECT_THROW(parse_metric("manhattan"), ConfigError);
}

// ---- Adam --------------------------------------------------------------------

TEST(Reduce, LogSumExp) {
  const Tensor a = Tensor::matrix({{0.0, std::log(3.0)}, {1000.0, 1000.0}});
  expect_values(logsumexp(a, 1), {std::log(4.0), 1000.0 + std::log(2.0)});
  expect_values(logsumexp(Tensor::vector({-1e308, -1e308})), {-1e308 + std::log(2.0)});
  Rng rng(40);
  const Tensor x = random_tensor({3, 4}, rng);
  EXPECT_LE(wvi::testing::grad_check([](const Tensor& t) { return sum(square(logsumexp(t, 0))); }, x), kPropTol);
  EXPECT_LE(wvi::testing::grad_check([](const Tensor& t) { return logsumexp(t); }, x), kPropTol);
}

TEST(Adam, ZeroGradientFromFreshStateLeavesParameters) {
  Tensor w = Tensor::vector({1.5, -2});
  std::vector<Tensor*> params{&w};
  AdamState state;
  adam_step(params, std::vector<Tensor>{Tensor::zeros({2})}, state, {});
  expect_values(w, {1.5, -2}, 0.0);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, MomentumKeepsMovingAfterGradientVanishes) {
  Tensor w = Tensor::vector({1.5, -2});
  std::vector<Tensor*> params{&w};
  AdamState state;
  adam_step(params, std::vector<Tensor>{Tensor::vector({1, 1})}, state, {});
  const double m0 = state.first[0][0];
  const Tensor before = w;
  adam_step(params, std::vector<Tensor>{Tensor::zeros({2})}, state, {});
  EXPECT_LT(w[0], before[0]);
  EXPECT_DOUBLE_EQ(state.first[0][0], 0.9 * m0);
}

TEST(Adam, DescendsAndConverges) {
  Tensor w(1.0);
  std::vector<Tensor*> params{&w};
  AdamState state;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step(params, std::vector<Tensor>{Tensor(2.0 * w.item())}, state, cfg);
  EXPECT_LT(w.item(), 1.0);

  Tensor v(0.0);
  std::vector<Tensor*> pv{&v};
  AdamState sv;
  for (int i = 0; i < 500; ++i) {
    const auto g = tape_grad([](const Tensor& x) { return square(x - 3.0); }, v);
    adam_step(pv, std::vector<Tensor>{Tensor(g[0])}, sv, cfg);
  }
  EXPECT_LT(std::abs(v.item() - 3.0), 1e-2);
}

TEST(Adam, ShapeChecks) {
  Tensor w = Tensor::vector({1, 2});
  std::vector<Tensor*> params{&w};
  AdamState state;
  EXPECT_THROW(adam_step(params, std::vector<Tensor>{Tensor::vector({1})}, state, {}), ShapeError);
  EXPECT_THROW(adam_step(params, std::vector<Tensor>{}, state, {}), ShapeError);
}

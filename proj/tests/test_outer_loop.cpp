#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "spca/outer_loop.hpp"
#include "spca/spiked_model.hpp"
#include "test_util.hpp"

namespace spca {
namespace {

struct Enumerated {
  double value = std::numeric_limits<double>::infinity();
  BinaryVector z;
};

Enumerated enumerate_F(const Dataset& data, Index s, const SubproblemConfig& sub) {
  Enumerated best;
  testing::for_each_support(data.p(), s, [&](const BinaryVector& z) {
    const double v = evaluate_F(data, z, sub).value;
    if (v < best.value) {
      best.value = v;
      best.z = z;
    }
  });
  return best;
}

SolverConfig exact_config(Index s) {
  SolverConfig cfg;
  cfg.s = s;
  cfg.tol = 0.0;
  cfg.deterministic = true;
  return cfg;
}

Dataset planted(Index p, Index s, Index n, std::uint64_t seed) {
  return sample_data(make_model(p, s, 1.0, seed), n, seed + 1000);
}

TEST(DiagonalThresholding, DominantColumn) {
  Dataset base = testing::random_dataset(40, 5, 1);
  Eigen::MatrixXd x = base.X();
  x.col(1) *= 3.0;
  EXPECT_EQ(diagonal_thresholding(Dataset(x), 1), (IndexSet{1}));
}

TEST(DiagonalThresholding, FullSetAndTies) {
  const Dataset d = testing::random_dataset(20, 4, 2);
  EXPECT_EQ(diagonal_thresholding(d, 4), (IndexSet{0, 1, 2, 3}));
  EXPECT_EQ(diagonal_thresholding(d, 9), (IndexSet{0, 1, 2, 3}));

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 4);
  x(0, 1) = x(1, 2) = x(2, 3) = 2.0;
  x(3, 0) = 1.0;
  EXPECT_EQ(diagonal_thresholding(Dataset(x), 2), (IndexSet{1, 2}));
  EXPECT_THROW(diagonal_thresholding(d, 0), ParameterError);
}

TEST(Initialize, SingleSpikePicksMaxVarianceColumn) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset d = testing::random_dataset(30, 8, seed);
    SolverConfig cfg = exact_config(1);
    Index argmax = 0;
    d.column_sq_norms().maxCoeff(&argmax);
    EXPECT_EQ(initialize(d, cfg), indicator(8, IndexSet{argmax})) << "seed " << seed;
  }
}

TEST(Initialize, VacuousScreeningMatchesCappedSolve) {
  const Dataset d = testing::random_dataset(40, 6, 3);
  SolverConfig cfg = exact_config(2);
  cfg.init_max_cuts = 4;
  const BinaryVector z0 = initialize(d, cfg);

  SolverConfig full = cfg;
  full.max_iters = cfg.init_max_cuts;
  full.initial_point = indicator(6, diagonal_thresholding(d, 2));
  const SolveResult r = solve(d, full);
  EXPECT_EQ(z0, r.z_hat);
}

// Diagonal screening cannot see coordinates whose variance excess sits below
// the sampling noise, so recovery is checked on reps where the screened set
// contains the true support.
TEST(Initialize, RecoversPlantedSupportWhenScreened) {
  int screened = 0;
  int hits = 0;
  for (std::uint64_t rep = 0; screened < 10; ++rep) {
    ASSERT_LT(rep, 100u);
    const SpikedModel m = make_model(50, 3, 1.0, rep);
    const Dataset d = sample_data(m, 5000, rep + 77);
    const IndexSet truth = m.support();
    const IndexSet a = diagonal_thresholding(d, 9);
    if (!std::includes(a.begin(), a.end(), truth.begin(), truth.end())) continue;
    ++screened;
    const BinaryVector z0 = initialize(d, exact_config(3));
    EXPECT_LE(cardinality(z0), 3);
    if (support_of(z0) == truth) ++hits;
  }
  EXPECT_GE(hits, 8);
}

TEST(LambdaHeuristic, ZeroWhenNoCoefficients) {
  const Dataset d = testing::random_dataset(10, 4, 4);
  EXPECT_EQ(lambda_heuristic(d, BinaryVector(4, 0), {}), 0.0);
  EXPECT_EQ(lambda_heuristic(d, indicator(4, IndexSet{2}), {}), 0.0);
}

TEST(LambdaHeuristic, ScalesWithSquareOfData) {
  const Dataset d = testing::random_dataset(25, 5, 5);
  const BinaryVector z0 = indicator(5, IndexSet{0, 2, 3});
  const double base = lambda_heuristic(d, z0, {});
  ASSERT_GT(base, 0.0);
  const Dataset scaled(3.0 * d.X());
  EXPECT_NEAR(lambda_heuristic(scaled, z0, {}), 9.0 * base, 1e-8 * 9.0 * base);
}

TEST(LambdaHeuristic, HandComputedSixByThree) {
  Eigen::MatrixXd x(6, 3);
  x << 1, 2, 0,
       0, 1, 1,
       2, 1, -1,
       -1, 0, 2,
       1, 1, 0,
       0, -1, 1;
  // z0 = {0, 1}: each column regresses on the other, one coefficient each,
  // clipped to [-1/2, 1/2].
  const Eigen::VectorXd c0 = x.col(0), c1 = x.col(1), c2 = x.col(2);
  const double b10 = std::clamp(c0.dot(c1) / c1.squaredNorm(), -0.5, 0.5);  // column 0 on column 1
  const double b01 = std::clamp(c1.dot(c0) / c0.squaredNorm(), -0.5, 0.5);
  const double numerator = (c0 - b10 * c1).squaredNorm() + (c1 - b01 * c0).squaredNorm() + c2.squaredNorm();
  const double expected = 0.1 * numerator / (b10 * b10 + b01 * b01);
  const double got = lambda_heuristic(Dataset(x), BinaryVector{1, 1, 0}, {});
  EXPECT_NEAR(got, expected, 1e-9 * expected);
}

TEST(Solve, ZeroToleranceMatchesEnumeration) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Dataset d = planted(10, 2, 60, seed);
    const SolveResult r = solve(d, exact_config(2));
    const Enumerated best = enumerate_F(d, 2, SubproblemConfig{});
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.gap, 0.0);
    EXPECT_NEAR(r.upper_bound, best.value, 1e-6 * best.value) << "seed " << seed;
  }
}

TEST(Solve, RevisitedAnchorClosesGap) {
  for (std::uint64_t seed = 10; seed < 16; ++seed) {
    const Dataset d = testing::random_dataset(30, 8, seed);
    const SolveResult r = solve(d, exact_config(3));
    std::set<BinaryVector> anchors{r.initial_point};
    for (const TraceRecord& rec : r.trace) {
      if (anchors.contains(rec.z)) {
        EXPECT_EQ(rec.gap, 0.0) << "seed " << seed << " iteration " << rec.iteration;
      }
      anchors.insert(rec.z);
    }
  }
}

TEST(Solve, BoundsSandwichEnumeratedOptimum) {
  for (std::uint64_t seed = 20; seed < 24; ++seed) {
    const Dataset d = planted(12, 3, 60, seed);
    const SolveResult r = solve(d, exact_config(3));
    const double opt = enumerate_F(d, 3, SubproblemConfig{}).value;
    for (const TraceRecord& rec : r.trace) {
      EXPECT_LE(rec.lower_bound, opt + 1e-9 * opt);
      EXPECT_GE(rec.upper_bound, opt - 1e-9 * opt);
    }
  }
}

TEST(Solve, WarmStartNeutrality) {
  const Dataset d = planted(10, 3, 50, 31);
  SolverConfig cfg = exact_config(3);
  const double reference = solve(d, cfg).upper_bound;
  for (const IndexSet& start : {IndexSet{}, IndexSet{0}, IndexSet{7, 8, 9}, IndexSet{1, 4, 6}}) {
    cfg.initial_point = indicator(10, start);
    EXPECT_DOUBLE_EQ(solve(d, cfg).upper_bound, reference);
  }
  cfg.initial_point.reset();
  cfg.screened_init = false;
  EXPECT_DOUBLE_EQ(solve(d, cfg).upper_bound, reference);
  cfg.local_search = false;
  EXPECT_DOUBLE_EQ(solve(d, cfg).upper_bound, reference);
}

void expect_result_invariants(const SolveResult& r, Index s) {
  EXPECT_LE(r.lower_bound, r.upper_bound + 1e-9 * (1.0 + std::abs(r.upper_bound)));
  EXPECT_NEAR(r.gap, std::max(0.0, relative_gap(r.upper_bound, r.lower_bound)), 1e-12);
  EXPECT_LE(cardinality(r.z_hat), s);
  const Index p = static_cast<Index>(r.z_hat.size());
  for (Index i = 0; i < p; ++i) {
    EXPECT_EQ(r.beta_hat(i, i), 0.0);
    if (r.z_hat[static_cast<std::size_t>(i)]) continue;
    EXPECT_EQ(r.beta_hat.row(i).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(r.beta_hat.col(i).cwiseAbs().maxCoeff(), 0.0);
  }
  for (std::size_t t = 1; t < r.trace.size(); ++t) {
    EXPECT_LE(r.trace[t].upper_bound, r.trace[t - 1].upper_bound);
    EXPECT_GE(r.trace[t].lower_bound, r.trace[t - 1].lower_bound);
  }
  EXPECT_EQ(static_cast<int>(r.trace.size()), r.iterations);
}

TEST(Solve, ResultInvariants) {
  for (std::uint64_t seed = 40; seed < 44; ++seed) {
    const Dataset d = planted(15, 3, 80, seed);
    SolverConfig cfg = exact_config(3);
    cfg.tol = 0.01;
    cfg.max_iters = 25;
    expect_result_invariants(solve(d, cfg), 3);
    expect_result_invariants(solve(d, cfg, LambdaMode::heuristic()), 3);
    expect_result_invariants(solve(d, cfg, LambdaMode::value(0.5)), 3);
  }
}

TEST(Solve, IterationCapReportsNotConverged) {
  const Dataset d = planted(30, 4, 60, 50);
  SolverConfig cfg = exact_config(4);
  cfg.max_iters = 1;
  cfg.screened_init = false;
  const SolveResult r = solve(d, cfg);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_FALSE(r.converged);
  EXPECT_GT(r.gap, 0.0);
  expect_result_invariants(r, 4);
}

TEST(Solve, HeuristicLambdaIsReported) {
  const Dataset d = planted(12, 2, 100, 60);
  SolverConfig cfg = exact_config(2);
  const SolveResult r = solve(d, cfg, LambdaMode::heuristic());
  EXPECT_DOUBLE_EQ(r.lambda, lambda_heuristic(d, r.initial_point, cfg.sub));
  EXPECT_EQ(solve(d, cfg, LambdaMode::value(0.25)).lambda, 0.25);
}

TEST(Solve, RejectsBadConfig) {
  const Dataset d = testing::random_dataset(10, 4, 6);
  SolverConfig cfg;
  cfg.s = 5;
  EXPECT_THROW(solve(d, cfg), ParameterError);
  cfg.s = 0;
  EXPECT_THROW(solve(d, cfg), ParameterError);
  cfg.s = 2;
  cfg.tol = 1.0;
  EXPECT_THROW(solve(d, cfg), ParameterError);
  EXPECT_THROW(LambdaMode::parse("-1"), ParameterError);
  EXPECT_THROW(LambdaMode::parse("abc"), ParameterError);
  EXPECT_EQ(LambdaMode::parse("heuristic").kind(), LambdaMode::Kind::heuristic);
  EXPECT_EQ(LambdaMode::parse("0.5").explicit_value(), 0.5);
}

}  // namespace
}  // namespace spca

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

#include "spca/master_milp.hpp"
#include "spca/random.hpp"
#include "test_util.hpp"

namespace spca {
namespace {

Cut cut_from(double offset, std::vector<double> g) {
  Eigen::VectorXd grad = Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Index>(g.size()));
  return Cut::make(BinaryVector(g.size(), 0), offset, grad);
}

// Random cut set. `integral` draws small integers so that ties are common.
MasterProblem random_master(Index p, Index s, int cuts, Rng& rng, bool integral) {
  MasterProblem mp(p, s);
  for (int k = 0; k < cuts; ++k) {
    Eigen::VectorXd g(p);
    for (Index i = 0; i < p; ++i) {
      g[i] = integral ? static_cast<double>(static_cast<int>(rng.below(5)) - 3) : -1.0 + 1.3 * rng.uniform();
    }
    BinaryVector anchor(static_cast<std::size_t>(p), 0);
    for (Index i = 0; i < p; ++i) anchor[static_cast<std::size_t>(i)] = rng.uniform() < 0.2 ? 1 : 0;
    const double value = integral ? static_cast<double>(rng.below(4)) : 5.0 * rng.uniform();
    mp.add_cut(Cut::make(anchor, value, g));
  }
  return mp;
}

// Exhaustive optimum over the node's feasible set.
double node_optimum(const MasterProblem& mp, const BnbNode& node) {
  double best = std::numeric_limits<double>::infinity();
  testing::for_each_support(mp.p(), mp.s(), [&](const BinaryVector& z) {
    for (Index i : node.fixed_one)
      if (!z[static_cast<std::size_t>(i)]) return;
    for (Index i : node.fixed_zero)
      if (z[static_cast<std::size_t>(i)]) return;
    best = std::min(best, mp.evaluate(z));
  });
  return best;
}

TEST(Cut, OffsetRecomputesFromAnchor) {
  const Cut c = Cut::make({1, 0, 1}, 4.0, Eigen::Vector3d(-1.0, 2.0, -0.5));
  EXPECT_NEAR(c.offset, 4.0 + 1.0 + 0.5, 1e-10);
  EXPECT_NEAR(c.at(c.anchor), c.value, 1e-10);
}

TEST(MasterProblem, RejectsMalformedCuts) {
  MasterProblem mp(3, 1);
  EXPECT_THROW(mp.add_cut(cut_from(0.0, {1.0, 2.0})), ParameterError);
  EXPECT_THROW(solve_master(mp), ParameterError);
}

TEST(NodeLowerBound, SingleCutIsExact) {
  MasterProblem mp(5, 2);
  mp.add_cut(cut_from(1.0, {-0.5, 0.2, -3.0, -1.0, 0.0}));
  const double bound = node_lower_bound(mp, BnbNode{});
  EXPECT_DOUBLE_EQ(bound, 1.0 - 3.0 - 1.0);
  EXPECT_DOUBLE_EQ(bound, milp_bruteforce(mp).eta);
}

TEST(NodeLowerBound, DuplicateCutsMatchSingle) {
  MasterProblem one(5, 2), two(5, 2);
  const std::vector<double> g = {-0.5, 0.2, -3.0, -1.0, 0.0};
  one.add_cut(cut_from(1.0, g));
  two.add_cut(cut_from(1.0, g));
  two.add_cut(cut_from(1.0, g));
  EXPECT_NEAR(node_lower_bound(two, BnbNode{}), node_lower_bound(one, BnbNode{}), 1e-12);
}

TEST(NodeLowerBound, NeverExceedsEnumeratedOptimum) {
  Rng rng(99);
  for (int inst = 0; inst < 50; ++inst) {
    const MasterProblem mp = random_master(12, 3, 5, rng, false);
    EXPECT_LE(node_lower_bound(mp, BnbNode{}), milp_bruteforce(mp).eta + 1e-12) << "instance " << inst;

    BnbNode node;
    node.fixed_one = {static_cast<Index>(rng.below(12))};
    for (Index i = 0; i < 12; ++i) {
      if (i != node.fixed_one[0] && rng.uniform() < 0.3) node.fixed_zero.push_back(i);
    }
    EXPECT_LE(node_lower_bound(mp, node), node_optimum(mp, node) + 1e-12) << "instance " << inst;
  }
}

TEST(SolveMaster, TwoVariableExample) {
  MasterProblem mp(2, 1);
  mp.add_cut(cut_from(0.0, {-1.0, -3.0}));
  mp.add_cut(cut_from(-1.0, {0.0, 0.0}));
  const MasterSolution sol = solve_master(mp);
  EXPECT_DOUBLE_EQ(sol.eta, -1.0);
  EXPECT_EQ(sol.z, (BinaryVector{1, 0}));
  const MasterSolution brute = milp_bruteforce(mp);
  EXPECT_DOUBLE_EQ(brute.eta, -1.0);
  EXPECT_EQ(brute.z, (BinaryVector{1, 0}));
}

TEST(SolveMaster, PositiveGradientsSelectNothing) {
  MasterProblem mp(4, 2);
  mp.add_cut(cut_from(2.5, {0.1, 1.0, 2.0, 0.3}));
  const MasterSolution sol = solve_master(mp);
  EXPECT_EQ(sol.z, BinaryVector(4, 0));
  EXPECT_DOUBLE_EQ(sol.eta, 2.5);
}

TEST(SolveMaster, MatchesEnumerationOnRandomInstances) {
  Rng rng(7);
  for (int inst = 0; inst < 50; ++inst) {
    const Index p = 4 + static_cast<Index>(rng.below(13));
    const Index s = 1 + static_cast<Index>(rng.below(4));
    const int cuts = 1 + static_cast<int>(rng.below(8));
    const MasterProblem mp = random_master(p, s, cuts, rng, false);
    const MasterSolution bb = solve_master(mp);
    const MasterSolution brute = milp_bruteforce(mp);
    EXPECT_NEAR(bb.eta, brute.eta, 1e-9) << "instance " << inst;
    EXPECT_EQ(bb.z, brute.z) << "instance " << inst;
    EXPECT_EQ(bb.eta, mp.evaluate(bb.z));
    EXPECT_LE(cardinality(bb.z), s);
  }
}

TEST(SolveMaster, TieBreakOnIntegralInstances) {
  Rng rng(13);
  for (int inst = 0; inst < 40; ++inst) {
    const Index p = 4 + static_cast<Index>(rng.below(9));
    const Index s = 1 + static_cast<Index>(rng.below(4));
    const MasterProblem mp = random_master(p, s, 1 + static_cast<int>(rng.below(6)), rng, true);
    const MasterSolution bb = solve_master(mp);
    const MasterSolution brute = milp_bruteforce(mp);
    EXPECT_EQ(bb.eta, brute.eta) << "instance " << inst;
    EXPECT_EQ(bb.z, brute.z) << "instance " << inst;
  }
}

TEST(SolveMaster, AddingCutsNeverLowersOptimum) {
  Rng rng(21);
  for (int inst = 0; inst < 20; ++inst) {
    MasterProblem mp = random_master(10, 3, 1, rng, false);
    double prev = solve_master(mp).eta;
    for (int k = 0; k < 5; ++k) {
      const MasterProblem extra = random_master(10, 3, 1, rng, false);
      mp.add_cut(extra.cuts().front());
      const double eta = solve_master(mp).eta;
      EXPECT_GE(eta, prev - 1e-12);
      prev = eta;
    }
  }
}

TEST(SolveMaster, EtaBoundsEveryFeasiblePoint) {
  Rng rng(5);
  const MasterProblem mp = random_master(9, 3, 6, rng, false);
  const double eta = solve_master(mp).eta;
  testing::for_each_support(9, 3, [&](const BinaryVector& z) { EXPECT_LE(eta, mp.evaluate(z) + 1e-12); });
}

TEST(SolveMaster, RootFixedZeroRestrictsSearch) {
  Rng rng(3);
  const MasterProblem mp = random_master(10, 3, 4, rng, false);
  MasterOptions opt;
  opt.root_fixed_zero = BinaryVector(10, 0);
  for (Index i = 0; i < 10; i += 2) opt.root_fixed_zero[static_cast<std::size_t>(i)] = 1;
  const MasterSolution sol = solve_master(mp, opt);
  for (Index i = 0; i < 10; i += 2) EXPECT_EQ(sol.z[static_cast<std::size_t>(i)], 0);
  BnbNode node;
  for (Index i = 0; i < 10; i += 2) node.fixed_zero.push_back(i);
  EXPECT_NEAR(sol.eta, node_optimum(mp, node), 1e-12);
}

TEST(SolveMaster, NodeBudgetCarriesValidBounds) {
  Rng rng(17);
  const MasterProblem mp = random_master(16, 4, 8, rng, false);
  MasterOptions opt;
  opt.max_nodes = 1;
  opt.dual_iters = 2;
  const double exact = milp_bruteforce(mp).eta;
  try {
    solve_master(mp, opt);
    SUCCEED() << "closed at the root";
  } catch (const MasterBudgetExceeded& e) {
    EXPECT_LE(e.best().lower_bound, exact + 1e-12);
    EXPECT_GE(e.best().eta, exact - 1e-12);
    EXPECT_NEAR(e.best().eta, mp.evaluate(e.best().z), 0.0);
  }
}

TEST(SolveMaster, GapToleranceAcceptsNearOptimal) {
  Rng rng(41);
  const MasterProblem mp = random_master(14, 4, 8, rng, false);
  MasterOptions opt;
  opt.gap_tol = 0.05;
  const MasterSolution sol = solve_master(mp, opt);
  const double exact = milp_bruteforce(mp).eta;
  EXPECT_LE(sol.eta - exact, 0.05 * std::abs(sol.eta) + 1e-12);
}

TEST(MilpBruteforce, TrivialCases) {
  MasterProblem flat(3, 2);
  flat.add_cut(cut_from(1.5, {0.0, 0.0, 0.0}));
  EXPECT_EQ(milp_bruteforce(flat).eta, 1.5);
  EXPECT_EQ(milp_bruteforce(flat).z, BinaryVector(3, 0));

  MasterProblem none(3, 0);
  none.add_cut(cut_from(1.0, {-5.0, -5.0, -5.0}));
  none.add_cut(cut_from(2.0, {-9.0, 0.0, 0.0}));
  EXPECT_EQ(milp_bruteforce(none).eta, 2.0);
  EXPECT_EQ(solve_master(none).eta, 2.0);
  EXPECT_EQ(solve_master(none).z, BinaryVector(3, 0));

  MasterProblem big(21, 2);
  big.add_cut(cut_from(0.0, std::vector<double>(21, -1.0)));
  EXPECT_THROW(milp_bruteforce(big), SizeError);
}

}  // namespace
}  // namespace spca

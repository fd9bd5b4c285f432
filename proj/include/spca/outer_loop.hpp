#pragma once

// Outer approximation for min F(z) over {z binary, sum(z) <= s}: evaluate
// F and a subgradient at the current point, add the cut, re-solve the master
// MILP exactly, and stop once the relative gap between the best evaluated
// value (UB) and the best master bound (LB) reaches the tolerance.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spca/dataset.hpp"
#include "spca/error.hpp"
#include "spca/master_milp.hpp"
#include "spca/parallel.hpp"
#include "spca/qp_subproblem.hpp"
#include "spca/support.hpp"

namespace spca {

class LambdaMode {
 public:
  enum class Kind { zero, heuristic, explicit_value };

  static LambdaMode zero() { return LambdaMode(Kind::zero, 0.0); }
  static LambdaMode heuristic() { return LambdaMode(Kind::heuristic, 0.0); }
  static LambdaMode value(double lambda) {
    if (!(lambda >= 0.0)) throw ParameterError("lambda must be >= 0");
    return LambdaMode(Kind::explicit_value, lambda);
  }

  // "zero", "heuristic", or a nonnegative number.
  static LambdaMode parse(const std::string& text) {
    if (text == "zero") return zero();
    if (text == "heuristic") return heuristic();
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || text.empty()) throw ParameterError("lambda must be zero, heuristic, or a number: " + text);
    return value(v);
  }

  Kind kind() const noexcept { return kind_; }
  double explicit_value() const noexcept { return value_; }

  std::string label() const {
    switch (kind_) {
      case Kind::zero:
        return "zero";
      case Kind::heuristic:
        return "heuristic";
      default:
        return std::to_string(value_);
    }
  }

 private:
  LambdaMode(Kind k, double v) : kind_(k), value_(v) {}
  Kind kind_;
  double value_;
};

struct SolverConfig {
  Index s = 1;
  double tol = 1e-4;          // target relative optimality gap
  double time_limit = 300.0;  // seconds, whole solve including initialization
  int max_iters = 500;        // cap on outer iterations (cuts)
  SubproblemConfig sub;
  std::uint64_t seed = 0;

  int master_dual_iters = 50;
  std::int64_t master_max_nodes = 5'000'000;

  // Restricted warm-start solve.
  bool screened_init = true;
  int init_max_cuts = 25;
  double init_time_limit = 10.0;
  // Overrides the initializer when set.
  std::optional<BinaryVector> initial_point;
  // Best-improvement swap search on the starting point before the loop.
  bool local_search = true;

  // Ignore wall-clock limits so runs depend on iteration caps only.
  bool deterministic = false;

  // Per-iteration progress lines, tab separated.
  std::ostream* log = nullptr;

  void validate() const {
    if (s < 1) throw ParameterError("SolverConfig: s must be >= 1");
    if (!(tol >= 0.0 && tol < 1.0)) throw ParameterError("SolverConfig: tol must lie in [0, 1)");
    if (!(time_limit > 0.0)) throw ParameterError("SolverConfig: time_limit must be > 0");
    if (max_iters < 1) throw ParameterError("SolverConfig: max_iters must be >= 1");
    if (init_max_cuts < 1) throw ParameterError("SolverConfig: init_max_cuts must be >= 1");
    sub.validate();
  }
};

struct TraceRecord {
  int iteration = 0;
  double upper_bound = 0.0;
  double lower_bound = 0.0;
  double gap = 0.0;
  double elapsed = 0.0;
  BinaryVector z;  // point returned by the master at this iteration
};

struct SolveResult {
  BinaryVector z_hat;
  Eigen::MatrixXd beta_hat;  // p x p, zero diagonal, supported on z_hat x z_hat
  double upper_bound = 0.0;
  double lower_bound = 0.0;
  double gap = 1.0;
  int iterations = 0;
  bool converged = false;
  double lambda = 0.0;
  BinaryVector initial_point;
  std::vector<TraceRecord> trace;
};

inline double relative_gap(double ub, double lb) { return (ub - lb) / std::max(ub, 1e-12); }

// Indices by decreasing sample variance; ties go to the smaller index.
inline IndexSet variance_order(const Dataset& data) {
  IndexSet order(static_cast<std::size_t>(data.p()));
  std::iota(order.begin(), order.end(), Index{0});
  const Eigen::VectorXd& norms = data.column_sq_norms();
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return norms[a] > norms[b]; });
  return order;
}

// The min(k, p) highest-variance columns, sorted ascending.
inline IndexSet diagonal_thresholding(const Dataset& data, Index k) {
  if (k < 1) throw ParameterError("diagonal_thresholding: k must be >= 1");
  IndexSet order = variance_order(data);
  order.resize(static_cast<std::size_t>(std::min(k, data.p())));
  std::sort(order.begin(), order.end());
  return order;
}

// 0.1 * sum_j ||X_j - sum_{i != j} b_ij X_i||^2 / sum_{i != j} b_ij^2 with b the
// unregularized column solutions at z0; 0 when b vanishes.
inline double lambda_heuristic(const Dataset& data, const BinaryVector& z0, const SubproblemConfig& sub) {
  SubproblemConfig plain = sub;
  plain.lambda = 0.0;
  const OracleResult r = evaluate_F(data, z0, plain);
  double numerator = 0.0;
  double denominator = 0.0;
  for (Index j = 0; j < data.p(); ++j) {
    if (const ColumnSolution* c = r.find(j)) {
      numerator += c->residual.squaredNorm();
      denominator += c->beta_col.squaredNorm();
    } else {
      numerator += data.column_sq_norms()[j];
    }
  }
  if (denominator == 0.0) return 0.0;
  return 0.1 * numerator / denominator;
}

namespace detail {

using Clock = std::chrono::steady_clock;

struct OuterRun {
  BinaryVector best_z;
  OracleResult best_oracle;
  double upper_bound = std::numeric_limits<double>::infinity();
  double lower_bound = -std::numeric_limits<double>::infinity();
  double gap = 1.0;
  int iterations = 0;
  bool converged = false;
  std::vector<TraceRecord> trace;
};

struct OuterSettings {
  Index s = 1;
  double tol = 0.0;
  int max_iters = 1;
  std::optional<Clock::time_point> deadline;
  Clock::time_point started;
  BinaryVector allowed;  // empty: every variable may be selected
  int dual_iters = 50;
  std::int64_t max_nodes = 5'000'000;
  // Relative tolerance handed to each master solve; 0 solves them exactly.
  double master_gap_tol = 0.0;
  std::ostream* log = nullptr;
  const char* log_tag = "";
};

inline void log_iteration(std::ostream& out, const char* tag, const TraceRecord& rec) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << tag << rec.iteration << '\t' << std::setprecision(12) << rec.upper_bound << '\t' << rec.lower_bound << '\t'
      << std::setprecision(6) << rec.gap << '\t' << std::fixed << std::setprecision(3) << rec.elapsed << '\t'
      << format_support(rec.z) << '\n';
  out.flags(flags);
  out.precision(precision);
}

inline OuterRun outer_approximation(const Dataset& data, const CrossProducts& cross, const SubproblemConfig& sub,
                                    const BinaryVector& start, const OuterSettings& set) {
  const Index p = data.p();
  MasterProblem mp(p, set.s);
  OuterRun run;
  std::map<BinaryVector, double> evaluated;

  auto evaluate = [&](const BinaryVector& z) {
    OracleResult r = evaluate_oracle(data, z, sub, cross);
    mp.add_cut(Cut::make(z, r.value, r.subgrad));
    evaluated.emplace(z, r.value);
    if (r.value < run.upper_bound) {
      run.upper_bound = r.value;
      run.best_z = z;
      run.best_oracle = std::move(r);
    }
  };

  evaluate(start);
  MasterOptions mopt;
  mopt.dual_iters = set.dual_iters;
  mopt.max_nodes = set.max_nodes;
  mopt.deadline = set.deadline;
  mopt.gap_tol = set.master_gap_tol;
  if (!set.allowed.empty()) {
    mopt.root_fixed_zero.resize(static_cast<std::size_t>(p));
    for (std::size_t i = 0; i < set.allowed.size(); ++i) mopt.root_fixed_zero[i] = set.allowed[i] ? 0 : 1;
  }

  std::optional<BinaryVector> previous_master;
  while (run.iterations < set.max_iters) {
    if (set.deadline && Clock::now() >= *set.deadline) break;
    ++run.iterations;

    if (previous_master) mp.set_incumbent(*previous_master);
    BinaryVector z;
    double bound = 0.0;
    try {
      MasterSolution ms = solve_master(mp, mopt);
      z = std::move(ms.z);
      bound = ms.lower_bound;
    } catch (const MasterBudgetExceeded& e) {
      z = e.best().z;
      bound = e.best().lower_bound;
    }
    previous_master = z;
    run.lower_bound = std::max(run.lower_bound, bound);

    const bool seen = evaluated.contains(z);
    if (!seen) evaluate(z);
    // Rounding can push the certified bound a hair above the incumbent
    // value; the gap is clamped at zero.
    run.gap = std::max(0.0, relative_gap(run.upper_bound, run.lower_bound));

    TraceRecord rec;
    rec.iteration = run.iterations;
    rec.upper_bound = run.upper_bound;
    rec.lower_bound = std::min(run.lower_bound, run.upper_bound);
    rec.gap = run.gap;
    rec.elapsed = std::chrono::duration<double>(Clock::now() - set.started).count();
    rec.z = z;
    if (set.log != nullptr) log_iteration(*set.log, set.log_tag, rec);
    run.trace.push_back(std::move(rec));

    if (run.gap <= set.tol) {
      run.converged = true;
      break;
    }
    // A repeated anchor adds no cut. After an exact master this already
    // closed the gap above; otherwise the loop can make no further progress.
    if (seen) break;
  }
  run.lower_bound = std::min(run.lower_bound, run.upper_bound);
  return run;
}

// Repeated best-improvement moves over the swap neighbourhood of z (plus
// single additions while |z| < s). Neighbours are scored in parallel and
// compared in a fixed order, so the path is thread-count independent.
inline BinaryVector polish(const Dataset& data, const SubproblemConfig& sub, BinaryVector z, Index s,
                           const std::optional<Clock::time_point>& deadline) {
  const Index p = data.p();
  SubproblemConfig serial = sub;
  serial.threads = 1;
  double current = evaluate_F(data, z, serial).value;
  for (;;) {
    if (deadline && Clock::now() >= *deadline) break;
    const IndexSet in = support_of(z);
    IndexSet out;
    for (Index i = 0; i < p; ++i)
      if (!z[static_cast<std::size_t>(i)]) out.push_back(i);
    std::vector<std::pair<Index, Index>> moves;  // (drop, add); drop = -1 adds only
    if (static_cast<Index>(in.size()) < s)
      for (Index a : out) moves.emplace_back(-1, a);
    for (Index d : in)
      for (Index a : out) moves.emplace_back(d, a);
    if (moves.empty()) break;

    std::vector<double> values(moves.size());
    parallel_for(moves.size(), sub.threads, [&](std::size_t k) {
      BinaryVector y = z;
      if (moves[k].first >= 0) y[static_cast<std::size_t>(moves[k].first)] = 0;
      y[static_cast<std::size_t>(moves[k].second)] = 1;
      values[k] = evaluate_F(data, y, serial).value;
    });
    const auto best = std::min_element(values.begin(), values.end());
    if (!(*best < current)) break;
    const auto& mv = moves[static_cast<std::size_t>(best - values.begin())];
    if (mv.first >= 0) z[static_cast<std::size_t>(mv.first)] = 0;
    z[static_cast<std::size_t>(mv.second)] = 1;
    current = *best;
  }
  return z;
}

inline std::optional<Clock::time_point> deadline_after(const SolverConfig& cfg, Clock::time_point from, double seconds) {
  if (cfg.deterministic) return std::nullopt;
  return from + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
}

inline BinaryVector initialize_impl(const Dataset& data, const CrossProducts& cross, const SolverConfig& cfg,
                                    Clock::time_point started) {
  const Index p = data.p();
  const Index s = std::min(cfg.s, p);
  const IndexSet order = variance_order(data);
  const IndexSet screened = diagonal_thresholding(data, 3 * s);

  IndexSet top(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(s));
  std::sort(top.begin(), top.end());

  OuterSettings set;
  set.s = cfg.s;
  set.tol = cfg.tol;
  set.max_iters = cfg.init_max_cuts;
  set.started = started;
  const double budget = std::min(cfg.init_time_limit, cfg.time_limit);
  set.deadline = deadline_after(cfg, Clock::now(), budget);
  set.allowed = indicator(p, screened);
  set.dual_iters = cfg.master_dual_iters;
  set.max_nodes = cfg.master_max_nodes;
  set.log = cfg.log;
  set.log_tag = "init\t";
  return outer_approximation(data, cross, cfg.sub, indicator(p, top), set).best_z;
}

}  // namespace detail

// Warm start: screen 3s columns by variance, then run a capped outer
// approximation restricted to them, started from the top-s columns.
inline BinaryVector initialize(const Dataset& data, const SolverConfig& cfg) {
  cfg.validate();
  const CrossProducts cross(data);
  return detail::initialize_impl(data, cross, cfg, detail::Clock::now());
}

inline SolveResult solve(const Dataset& data, const SolverConfig& cfg, const LambdaMode& lambda = LambdaMode::zero()) {
  cfg.validate();
  if (data.n() < 2) throw ParameterError("solve: need n >= 2");
  if (cfg.s > data.p()) throw ParameterError("solve: need s <= p");
  const Index p = data.p();
  const auto started = detail::Clock::now();
  const CrossProducts cross(data);

  SubproblemConfig sub = cfg.sub;
  SolverConfig init_cfg = cfg;
  if (lambda.kind() == LambdaMode::Kind::explicit_value) {
    sub.lambda = lambda.explicit_value();
  } else {
    sub.lambda = 0.0;
  }
  init_cfg.sub = sub;

  BinaryVector z0;
  if (cfg.initial_point) {
    z0 = *cfg.initial_point;
    if (static_cast<Index>(z0.size()) != p || cardinality(z0) > cfg.s) throw ParameterError("solve: infeasible initial point");
  } else if (cfg.screened_init) {
    z0 = detail::initialize_impl(data, cross, init_cfg, started);
  } else {
    z0 = BinaryVector(static_cast<std::size_t>(p), 0);
  }

  if (lambda.kind() == LambdaMode::Kind::heuristic) sub.lambda = lambda_heuristic(data, z0, sub);
  const BinaryVector start =
      cfg.local_search ? detail::polish(data, sub, z0, cfg.s, detail::deadline_after(cfg, started, cfg.time_limit)) : z0;

  detail::OuterSettings set;
  set.s = cfg.s;
  set.tol = cfg.tol;
  set.max_iters = cfg.max_iters;
  set.started = started;
  set.deadline = detail::deadline_after(cfg, started, cfg.time_limit);
  set.dual_iters = cfg.master_dual_iters;
  set.max_nodes = cfg.master_max_nodes;
  set.log = cfg.log;
  detail::OuterRun run = detail::outer_approximation(data, cross, sub, start, set);

  SolveResult out;
  out.z_hat = run.best_z;
  out.beta_hat = Eigen::MatrixXd::Zero(p, p);
  for (const ColumnSolution& c : run.best_oracle.columns) out.beta_hat.col(c.j) = c.beta_col;
  out.upper_bound = run.upper_bound;
  out.lower_bound = run.lower_bound;
  out.gap = run.gap;
  out.iterations = run.iterations;
  out.converged = run.converged;
  out.lambda = sub.lambda;
  out.initial_point = std::move(z0);
  out.trace = std::move(run.trace);
  return out;
}

}  // namespace spca

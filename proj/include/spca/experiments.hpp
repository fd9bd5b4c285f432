#pragma once

// Seeded simulation sweeps over the spiked model: each (s, n) cell and
// replication draws its own model and data, runs the requested methods, and
// records one MetricRow per method.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "spca/baselines.hpp"
#include "spca/error.hpp"
#include "spca/estimator.hpp"
#include "spca/io.hpp"
#include "spca/outer_loop.hpp"
#include "spca/parallel.hpp"
#include "spca/random.hpp"
#include "spca/spiked_model.hpp"

namespace spca {

enum class Scenario { vary_n, vary_s, gap_bench, compare };

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::vary_n:
      return "vary_n";
    case Scenario::vary_s:
      return "vary_s";
    case Scenario::gap_bench:
      return "gap_bench";
    default:
      return "compare";
  }
}

inline Scenario parse_scenario(const std::string& text) {
  for (Scenario s : {Scenario::vary_n, Scenario::vary_s, Scenario::gap_bench, Scenario::compare}) {
    if (to_string(s) == text) return s;
  }
  throw ParameterError("unknown scenario '" + text + "' (vary_n, vary_s, gap_bench, compare)");
}

// Method labels: "sls" runs the main solver with the configured lambda mode,
// "sls_zero" and "sls_heuristic" pin it; "tpower" and "covthresh" are the
// baselines.
inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> names = {"sls", "sls_zero", "sls_heuristic", "tpower", "covthresh"};
  return names;
}

inline std::vector<std::string> default_methods(Scenario s) {
  switch (s) {
    case Scenario::gap_bench:
      return {"sls_zero", "sls_heuristic"};
    case Scenario::compare:
      return {"sls", "tpower", "covthresh"};
    default:
      return {"sls"};
  }
}

struct ExperimentConfig {
  Scenario scenario = Scenario::compare;
  Index p = 100;
  std::vector<Index> s_grid = {5};
  std::vector<Index> n_grid = {500, 1000, 2000, 4000};
  double theta = 1.0;
  int replications = 10;
  std::uint64_t seed = 0;
  std::vector<std::string> methods;  // empty: scenario defaults
  SolverConfig solver;               // s and seed are set per cell
  LambdaMode lambda = LambdaMode::zero();
  double cov_alpha = 2.0;
  int tpower_max_iters = 1000;
  unsigned threads = 1;  // cells run in parallel; each solve is single threaded
  std::string output_dir;

  std::vector<std::string> resolved_methods() const { return methods.empty() ? default_methods(scenario) : methods; }

  void validate() const {
    if (s_grid.empty() || n_grid.empty()) throw ParameterError("experiment: grids must be nonempty");
    if (replications < 1) throw ParameterError("experiment: replications must be >= 1");
    if (p < 1) throw ParameterError("experiment: p must be >= 1");
    for (Index s : s_grid)
      if (s < 1 || s > p) throw ParameterError("experiment: every s must lie in [1, p]");
    for (Index n : n_grid)
      if (n < 2) throw ParameterError("experiment: every n must be >= 2");
    if (!(theta > 0.0 && theta <= 1.0)) throw ParameterError("experiment: theta must lie in (0, 1]");
    for (const std::string& m : resolved_methods()) {
      if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end()) {
        throw ParameterError("experiment: unknown method '" + m + "'");
      }
    }
    solver.sub.validate();
  }
};

// Baselines carry no optimality gap.
inline constexpr double kNoGap = -1.0;

struct MetricRow {
  std::string scenario;
  std::string method;
  Index p = 0;
  Index n = 0;
  Index s = 0;
  double theta = 0.0;
  int rep = 0;
  std::uint64_t seed = 0;  // data seed of the replication
  double sin_angle = 1.0;
  double support_error = 0.0;
  double gap = kNoGap;
  bool converged = true;
  int iterations = 0;
  double lambda = 0.0;
  double wall_seconds = 0.0;
  std::string status = "ok";  // ok, not_converged, error

  bool operator==(const MetricRow&) const = default;
};

inline const char* metric_header() {
  return "scenario,method,p,n,s,theta,rep,seed,sin_angle,support_error,gap,converged,iterations,lambda,wall_seconds,"
         "status";
}

inline std::string to_csv(const MetricRow& r) {
  using io::format_double;
  std::string out;
  out += r.scenario + ',' + r.method + ',' + std::to_string(r.p) + ',' + std::to_string(r.n) + ',' +
         std::to_string(r.s) + ',' + format_double(r.theta) + ',' + std::to_string(r.rep) + ',' +
         std::to_string(r.seed) + ',' + format_double(r.sin_angle) + ',' + format_double(r.support_error) + ',' +
         format_double(r.gap) + ',' + (r.converged ? "1" : "0") + ',' + std::to_string(r.iterations) + ',' +
         format_double(r.lambda) + ',' + format_double(r.wall_seconds) + ',' + r.status;
  return out;
}

inline MetricRow parse_metric_row(const std::string& line) {
  const auto f = io::split(line, ',');
  if (f.size() != 16) throw FormatError("metric row: expected 16 fields, got " + std::to_string(f.size()));
  MetricRow r;
  r.scenario = std::string(f[0]);
  r.method = std::string(f[1]);
  r.p = io::parse_int<Index>(f[2]);
  r.n = io::parse_int<Index>(f[3]);
  r.s = io::parse_int<Index>(f[4]);
  r.theta = io::parse_double(f[5]);
  r.rep = io::parse_int<int>(f[6]);
  r.seed = io::parse_int<std::uint64_t>(f[7]);
  r.sin_angle = io::parse_double(f[8]);
  r.support_error = io::parse_double(f[9]);
  r.gap = io::parse_double(f[10]);
  const int conv = io::parse_int<int>(f[11]);
  if (conv != 0 && conv != 1) throw FormatError("metric row: converged must be 0 or 1");
  r.converged = conv == 1;
  r.iterations = io::parse_int<int>(f[12]);
  r.lambda = io::parse_double(f[13]);
  r.wall_seconds = io::parse_double(f[14]);
  r.status = std::string(f[15]);
  while (!r.status.empty() && r.status.back() == '\r') r.status.pop_back();
  return r;
}

// Seeds depend only on the cell coordinates and the replication, so a
// sub-sweep reproduces the matching cells of a larger one. The model seed
// ignores n: every n in a replication shares the same u*.
inline std::uint64_t model_seed(std::uint64_t top, Index p, Index s, int rep) {
  return combine_seed(combine_seed(combine_seed(top, static_cast<std::uint64_t>(p)), static_cast<std::uint64_t>(s)),
                      static_cast<std::uint64_t>(rep));
}

inline std::uint64_t data_seed(std::uint64_t top, Index p, Index s, Index n, int rep) {
  return combine_seed(model_seed(top, p, s, rep), static_cast<std::uint64_t>(n) ^ 0x6461746173656564ULL);
}

namespace detail {

struct CellTask {
  Index s = 0;
  Index n = 0;
  int rep = 0;
};

inline MetricRow run_method(const ExperimentConfig& cfg, const std::string& method, const SpikedModel& model,
                            const Dataset& data, const CellTask& task, std::uint64_t dseed) {
  MetricRow row;
  row.scenario = to_string(cfg.scenario);
  row.method = method;
  row.p = cfg.p;
  row.n = task.n;
  row.s = task.s;
  row.theta = cfg.theta;
  row.rep = task.rep;
  row.seed = dseed;
  const IndexSet truth = model.support();

  const auto started = std::chrono::steady_clock::now();
  try {
    if (method.rfind("sls", 0) == 0) {
      SolverConfig sc = cfg.solver;
      sc.s = task.s;
      sc.seed = dseed;
      sc.sub.threads = 1;
      sc.log = nullptr;
      LambdaMode lm = cfg.lambda;
      if (method == "sls_zero") lm = LambdaMode::zero();
      if (method == "sls_heuristic") lm = LambdaMode::heuristic();
      const EstimatorOutput e = estimate(data, sc, lm);
      row.sin_angle = sin_angle(e.u_hat, model.u_star);
      row.support_error = support_error(e.support, truth);
      row.gap = e.solution.gap;
      row.converged = e.solution.converged;
      row.iterations = e.solution.iterations;
      row.lambda = e.solution.lambda;
      row.status = row.converged ? "ok" : "not_converged";
    } else {
      const BaselineResult b = method == "tpower"
                                   ? truncated_power_method_random_start(data, task.s, dseed, cfg.tpower_max_iters)
                                   : covariance_thresholding(data, task.s, cfg.cov_alpha);
      row.sin_angle = sin_angle(b.u_hat, model.u_star);
      row.support_error = support_error(b.support, truth);
      row.iterations = b.iterations;
    }
  } catch (const Error&) {
    // No estimate: score it as an empty support and an orthogonal direction.
    row.sin_angle = 1.0;
    row.support_error = support_error({}, truth);
    row.gap = method.rfind("sls", 0) == 0 ? 1.0 : kNoGap;
    row.converged = false;
    row.status = "error";
  }
  if (!cfg.solver.deterministic) {
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return row;
}

}  // namespace detail

// Rows come back ordered by (s, n, replication, method) regardless of the
// thread count.
inline std::vector<MetricRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<std::string> methods = cfg.resolved_methods();
  std::vector<detail::CellTask> tasks;
  for (Index s : cfg.s_grid)
    for (Index n : cfg.n_grid)
      for (int rep = 0; rep < cfg.replications; ++rep) tasks.push_back({s, n, rep});

  std::vector<std::vector<MetricRow>> results(tasks.size());
  parallel_for(tasks.size(), cfg.threads, [&](std::size_t k) {
    const detail::CellTask& t = tasks[k];
    const SpikedModel model = make_model(cfg.p, t.s, cfg.theta, model_seed(cfg.seed, cfg.p, t.s, t.rep));
    const std::uint64_t dseed = data_seed(cfg.seed, cfg.p, t.s, t.n, t.rep);
    const Dataset data = sample_data(model, t.n, dseed);
    for (const std::string& m : methods) results[k].push_back(detail::run_method(cfg, m, model, data, t, dseed));
  });

  std::vector<MetricRow> rows;
  for (auto& r : results)
    for (auto& row : r) rows.push_back(std::move(row));
  return rows;
}

struct Quantiles {
  double q1 = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double q3 = std::numeric_limits<double>::quiet_NaN();
  double mean = std::numeric_limits<double>::quiet_NaN();
};

// Linear interpolation between order statistics.
inline Quantiles quantiles(std::vector<double> v) {
  Quantiles q;
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  auto at = [&](double prob) {
    const double pos = prob * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  double sum = 0.0;
  for (double x : v) sum += x;
  q.mean = sum / static_cast<double>(v.size());
  return q;
}

struct SummaryRow {
  std::string scenario;
  std::string method;
  Index p = 0;
  Index n = 0;
  Index s = 0;
  int count = 0;
  Quantiles sin_angle;
  Quantiles support_error;
  Quantiles gap;  // baselines: no entries
  Quantiles wall_seconds;
  double recovery_rate = 0.0;
  double converged_rate = 0.0;
};

// Groups by (scenario, method, p, n, s), ordered by that key.
inline std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows) {
  using Key = std::tuple<std::string, std::string, Index, Index, Index>;
  std::map<Key, std::vector<const MetricRow*>> groups;
  for (const MetricRow& r : rows) groups[{r.scenario, r.method, r.p, r.n, r.s}].push_back(&r);

  std::vector<SummaryRow> out;
  for (const auto& [key, members] : groups) {
    SummaryRow sr;
    std::tie(sr.scenario, sr.method, sr.p, sr.n, sr.s) = key;
    sr.count = static_cast<int>(members.size());
    std::vector<double> sin, supp, gap, wall;
    int recovered = 0;
    int converged = 0;
    for (const MetricRow* r : members) {
      sin.push_back(r->sin_angle);
      supp.push_back(r->support_error);
      if (r->gap != kNoGap) gap.push_back(r->gap);
      wall.push_back(r->wall_seconds);
      recovered += r->support_error == 0.0;
      converged += r->converged;
    }
    sr.sin_angle = quantiles(sin);
    sr.support_error = quantiles(supp);
    sr.gap = quantiles(gap);
    sr.wall_seconds = quantiles(wall);
    sr.recovery_rate = static_cast<double>(recovered) / sr.count;
    sr.converged_rate = static_cast<double>(converged) / sr.count;
    out.push_back(std::move(sr));
  }
  return out;
}

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << metric_header() << '\n';
  for (const MetricRow& r : rows) out << to_csv(r) << '\n';
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  auto q = [](const Quantiles& v) {
    auto f = [](double x) { return std::isnan(x) ? std::string("NA") : io::format_double(x); };
    return f(v.median) + ',' + f(v.q1) + ',' + f(v.q3) + ',' + f(v.mean);
  };
  out << "scenario,method,p,n,s,count,"
         "sin_median,sin_q1,sin_q3,sin_mean,"
         "supp_median,supp_q1,supp_q3,supp_mean,"
         "gap_median,gap_q1,gap_q3,gap_mean,"
         "wall_median,wall_q1,wall_q3,wall_mean,recovery_rate,converged_rate\n";
  for (const SummaryRow& r : rows) {
    out << r.scenario << ',' << r.method << ',' << r.p << ',' << r.n << ',' << r.s << ',' << r.count << ','
        << q(r.sin_angle) << ',' << q(r.support_error) << ',' << q(r.gap) << ',' << q(r.wall_seconds) << ','
        << io::format_double(r.recovery_rate) << ',' << io::format_double(r.converged_rate) << '\n';
  }
}

// <dir>/<scenario>.csv and <dir>/summary.csv.
inline void write_experiment_outputs(const std::string& dir, const ExperimentConfig& cfg,
                                     const std::vector<MetricRow>& rows) {
  std::filesystem::create_directories(dir);
  {
    auto out = io::open_output((std::filesystem::path(dir) / (to_string(cfg.scenario) + ".csv")).string());
    write_metrics_csv(out, rows);
  }
  auto out = io::open_output((std::filesystem::path(dir) / "summary.csv").string());
  write_summary_csv(out, summarize(rows));
}

}  // namespace spca

// Command-line front end: solve, estimate, experiment, bruteforce-check.
//
// Exit status: 0 success, 2 solver stopped before reaching the requested
// gap, 1 on any error (including a brute-force mismatch).

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spca/baselines.hpp"
#include "spca/estimator.hpp"
#include "spca/experiments.hpp"
#include "spca/io.hpp"
#include "spca/outer_loop.hpp"
#include "spca/parallel.hpp"
#include "spca/spiked_model.hpp"

namespace {

using namespace spca;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct Options {
  Index p = 100;
  std::string n = "500";
  std::string s = "5";
  double theta = 1.0;
  double tol = 1e-4;
  double time_limit = 300.0;
  std::string lambda = "zero";
  std::uint64_t seed = 0;
  int reps = 10;
  std::string out;
  int max_iters = 500;
  unsigned threads = 0;  // 0: SPCA_SLS_THREADS or hardware
  bool deterministic = false;
  bool quiet = false;
  std::string data;
  bool save_data = false;
  std::string scenario = "compare";
  std::string methods;
  double alpha = 2.0;
};

std::vector<Index> parse_grid(const std::string& text, const char* name) {
  std::vector<Index> out;
  for (auto part : io::split(text, ',')) {
    try {
      out.push_back(io::parse_int<Index>(part));
    } catch (const FormatError&) {
      throw ParameterError(std::string("--") + name + ": not an integer list: " + text);
    }
  }
  return out;
}

Index single(const std::string& text, const char* name) {
  const auto grid = parse_grid(text, name);
  if (grid.size() != 1) throw ParameterError(std::string("--") + name + " takes a single value for this command");
  return grid.front();
}

unsigned thread_count(const Options& o) {
  if (o.deterministic) return 1;
  return o.threads > 0 ? o.threads : default_thread_count();
}

SolverConfig solver_config(const Options& o, Index s) {
  SolverConfig cfg;
  cfg.s = s;
  cfg.tol = o.tol;
  cfg.time_limit = o.time_limit;
  cfg.max_iters = o.max_iters;
  cfg.seed = o.seed;
  cfg.deterministic = o.deterministic;
  cfg.sub.threads = thread_count(o);
  if (!o.quiet) cfg.log = &std::cerr;
  return cfg;
}

std::string support_text(const BinaryVector& z) {
  std::string out;
  for (Index i : support_of(z)) out += (out.empty() ? "" : " ") + std::to_string(i);
  return out;
}

std::filesystem::path out_dir(const Options& o) {
  std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  return dir;
}

// Synthetic instance unless --data names a CSV file.
struct Instance {
  Dataset data;
  std::optional<SpikedModel> model;
};

Instance load_instance(const Options& o, Index s) {
  if (!o.data.empty()) {
    auto in = io::open_input(o.data);
    return Instance{io::read_dataset_csv(in), std::nullopt};
  }
  const Index n = single(o.n, "n");
  SpikedModel m = make_model(o.p, s, o.theta, model_seed(o.seed, o.p, s, 0));
  Dataset d = sample_data(m, n, data_seed(o.seed, o.p, s, n, 0));
  if (!o.out.empty()) {
    const auto dir = out_dir(o);
    auto mf = io::open_output((dir / "model.txt").string());
    io::write_model(mf, m);
    if (o.save_data) {
      auto df = io::open_output((dir / "data.csv").string());
      io::write_dataset_csv(df, d);
    }
  }
  return Instance{std::move(d), std::move(m)};
}

void write_trace(const Options& o, const SolveResult& r) {
  auto out = io::open_output((out_dir(o) / "trace.csv").string());
  out << "iteration,upper_bound,lower_bound,gap,elapsed,support\n";
  for (const TraceRecord& t : r.trace) {
    out << t.iteration << ',' << io::format_double(t.upper_bound) << ',' << io::format_double(t.lower_bound) << ','
        << io::format_double(t.gap) << ',' << io::format_double(o.deterministic ? 0.0 : t.elapsed) << ','
        << support_text(t.z) << '\n';
  }
}

struct Summary {
  std::vector<std::pair<std::string, std::string>> fields;
  void add(const std::string& k, const std::string& v) { fields.emplace_back(k, v); }
  void add(const std::string& k, double v) { add(k, io::format_double(v)); }

  void print(std::ostream& out) const {
    for (const auto& [k, v] : fields) out << k << '=' << v << '\n';
  }
  void write_csv(const std::filesystem::path& path) const {
    auto out = io::open_output(path.string());
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i].first;
    out << '\n';
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i].second;
    out << '\n';
  }
};

void add_solution(Summary& sum, const Dataset& d, Index s, const SolveResult& r) {
  sum.add("p", std::to_string(d.p()));
  sum.add("n", std::to_string(d.n()));
  sum.add("s", std::to_string(s));
  sum.add("lambda", r.lambda);
  sum.add("upper_bound", r.upper_bound);
  sum.add("lower_bound", r.lower_bound);
  sum.add("gap", r.gap);
  sum.add("iterations", std::to_string(r.iterations));
  sum.add("converged", r.converged ? "1" : "0");
  sum.add("support", support_text(r.z_hat));
}

int run_solve(const Options& o) {
  const Index s = single(o.s, "s");
  const Instance inst = load_instance(o, s);
  const SolveResult r = solve(inst.data, solver_config(o, s), LambdaMode::parse(o.lambda));
  Summary sum;
  add_solution(sum, inst.data, s, r);
  if (inst.model) sum.add("support_error", support_error(support_of(r.z_hat), inst.model->support()));
  sum.print(std::cout);
  if (!o.out.empty()) {
    sum.write_csv(out_dir(o) / "result.csv");
    write_trace(o, r);
  }
  return r.converged ? kExitOk : kExitNotConverged;
}

int run_estimate(const Options& o) {
  const Index s = single(o.s, "s");
  const Instance inst = load_instance(o, s);
  const EstimatorOutput e = estimate(inst.data, solver_config(o, s), LambdaMode::parse(o.lambda));
  Summary sum;
  add_solution(sum, inst.data, s, e.solution);
  sum.add("spectral_ratio", e.spectral_ratio);
  if (inst.model) {
    sum.add("sin_angle", sin_angle(e.u_hat, inst.model->u_star));
    sum.add("support_error", support_error(e.support, inst.model->support()));
  }
  sum.print(std::cout);
  if (!o.out.empty()) {
    const auto dir = out_dir(o);
    sum.write_csv(dir / "result.csv");
    write_trace(o, e.solution);
    auto out = io::open_output((dir / "estimate.csv").string());
    io::write_estimate_csv(out, e.u_hat, e.sigma_hat_sq, e.support);
  }
  return e.solution.converged ? kExitOk : kExitNotConverged;
}

int run_experiment_cmd(const Options& o) {
  ExperimentConfig cfg;
  cfg.scenario = parse_scenario(o.scenario);
  cfg.p = o.p;
  cfg.s_grid = parse_grid(o.s, "s");
  cfg.n_grid = parse_grid(o.n, "n");
  cfg.theta = o.theta;
  cfg.replications = o.reps;
  cfg.seed = o.seed;
  if (!o.methods.empty()) {
    for (auto m : io::split(o.methods, ',')) cfg.methods.emplace_back(m);
  }
  cfg.solver = solver_config(o, cfg.s_grid.front());
  cfg.solver.log = nullptr;
  cfg.lambda = LambdaMode::parse(o.lambda);
  cfg.cov_alpha = o.alpha;
  cfg.threads = thread_count(o);

  const auto rows = run_experiment(cfg);
  if (o.out.empty()) {
    write_metrics_csv(std::cout, rows);
  } else {
    write_experiment_outputs(o.out, cfg, rows);
  }
  write_summary_csv(o.out.empty() ? std::cerr : std::cout, summarize(rows));
  return kExitOk;
}

int run_bruteforce(const Options& o) {
  const Index s = single(o.s, "s");
  const Index n = single(o.n, "n");
  if (o.p > 20) throw SizeError("bruteforce-check: p must be <= 20");
  std::ostringstream table;
  table << "rep,seed,lambda,solver_value,enumerated_value,relative_difference,solver_support,enumerated_support,match\n";
  bool all_match = true;
  for (int rep = 0; rep < o.reps; ++rep) {
    const SpikedModel m = make_model(o.p, s, o.theta, model_seed(o.seed, o.p, s, rep));
    const std::uint64_t dseed = data_seed(o.seed, o.p, s, n, rep);
    const Dataset d = sample_data(m, n, dseed);
    SolverConfig cfg = solver_config(o, s);
    cfg.tol = 0.0;
    cfg.log = nullptr;
    const SolveResult r = solve(d, cfg, LambdaMode::parse(o.lambda));

    SubproblemConfig sub = cfg.sub;
    sub.lambda = r.lambda;
    double best = std::numeric_limits<double>::infinity();
    BinaryVector best_z;
    BinaryVector z(static_cast<std::size_t>(o.p), 0);
    auto visit = [&](auto&& self, Index start, Index used) -> void {
      const double v = evaluate_F(d, z, sub).value;
      if (v < best) {
        best = v;
        best_z = z;
      }
      if (used == s) return;
      for (Index i = start; i < o.p; ++i) {
        z[static_cast<std::size_t>(i)] = 1;
        self(self, i + 1, used + 1);
        z[static_cast<std::size_t>(i)] = 0;
      }
    };
    visit(visit, 0, 0);

    const double rel = std::abs(r.upper_bound - best) / std::max(std::abs(best), 1e-12);
    const bool match = rel <= 1e-6 && r.converged;
    all_match = all_match && match;
    table << rep << ',' << dseed << ',' << io::format_double(r.lambda) << ',' << io::format_double(r.upper_bound) << ','
          << io::format_double(best) << ',' << io::format_double(rel) << ',' << support_text(r.z_hat) << ','
          << support_text(best_z) << ',' << (match ? 1 : 0) << '\n';
  }
  std::cout << table.str();
  if (!o.out.empty()) {
    auto out = io::open_output((out_dir(o) / "bruteforce.csv").string());
    out << table.str();
  }
  if (!all_match) std::cerr << "bruteforce-check: solver and enumeration disagree\n";
  return all_match ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse PCA via structured sparse least squares and outer approximation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file mirroring the long options");

  Options o;
  app.add_option("--p", o.p, "dimension of synthetic data")->capture_default_str();
  app.add_option("--n", o.n, "sample size (comma list for experiment)")->capture_default_str();
  app.add_option("--s", o.s, "sparsity (comma list for experiment)")->capture_default_str();
  app.add_option("--theta", o.theta, "spike strength in (0, 1]")->capture_default_str();
  app.add_option("--tol", o.tol, "target relative optimality gap")->capture_default_str();
  app.add_option("--time-limit", o.time_limit, "seconds per solve")->capture_default_str();
  app.add_option("--lambda", o.lambda, "zero | heuristic | <value>")->capture_default_str();
  app.add_option("--seed", o.seed, "top-level seed")->capture_default_str();
  app.add_option("--reps", o.reps, "replications")->capture_default_str();
  app.add_option("--out", o.out, "output directory");
  app.add_option("--max-iters", o.max_iters, "outer iteration cap")->capture_default_str();
  app.add_option("--threads", o.threads, "worker threads (default: SPCA_SLS_THREADS or all cores)");
  app.add_flag("--deterministic", o.deterministic,
               "single thread, no wall-clock limits, timing columns written as 0");
  app.add_flag("--quiet", o.quiet, "no per-iteration progress on stderr");
  app.add_option("--data", o.data, "dataset CSV (rows are observations) instead of synthetic data");
  app.add_flag("--save-data", o.save_data, "also write the synthetic dataset to <out>/data.csv");
  app.add_option("--scenario", o.scenario, "vary_n | vary_s | gap_bench | compare")->capture_default_str();
  app.add_option("--methods", o.methods, "comma list of sls, sls_zero, sls_heuristic, tpower, covthresh");
  app.add_option("--alpha", o.alpha, "covariance thresholding constant")->capture_default_str();

  auto* solve_cmd = app.add_subcommand("solve", "solve the mixed-integer problem and report bounds");
  auto* estimate_cmd = app.add_subcommand("estimate", "solve, then extract the principal component");
  auto* experiment_cmd = app.add_subcommand("experiment", "seeded simulation sweep written as CSV");
  auto* brute_cmd = app.add_subcommand("bruteforce-check", "compare tol = 0 solves against support enumeration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (solve_cmd->parsed()) return run_solve(o);
    if (estimate_cmd->parsed()) return run_estimate(o);
    if (experiment_cmd->parsed()) return run_experiment_cmd(o);
    if (brute_cmd->parsed()) return run_bruteforce(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

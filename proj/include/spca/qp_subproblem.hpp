#pragma once

// Evaluation oracle for the convex integer reformulation
//
//   F(z) = min  1/2 sum_j ||X_j - X_{-j} b_j||^2 + lambda sum_j sum_{i != j} b_ij^2
//          s.t. |b_ij| <= M z_i, b_ij = 0 unless z_j = 1, b_jj = 0,
//
// at binary z, together with a subgradient built from the box multipliers of
// the per-column problems. Each column with z_j = 1 is an independent
// box-constrained ridge least-squares problem over the other active columns.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spca/dataset.hpp"
#include "spca/error.hpp"
#include "spca/parallel.hpp"
#include "spca/support.hpp"

namespace spca {

struct SubproblemConfig {
  double lambda = 0.0;
  double big_m = 0.5;
  // Relative KKT tolerance: column j stops once the largest box-KKT violation
  // is at most qp_tol * (1 + ||X_j||^2).
  double qp_tol = 1e-8;
  int qp_max_iter = 100000;
  unsigned threads = 1;

  void validate() const {
    if (!(lambda >= 0.0)) throw ParameterError("SubproblemConfig: lambda must be >= 0");
    if (!(big_m > 0.0)) throw ParameterError("SubproblemConfig: big_m must be > 0");
    if (!(qp_tol > 0.0)) throw ParameterError("SubproblemConfig: qp_tol must be > 0");
    if (qp_max_iter < 1) throw ParameterError("SubproblemConfig: qp_max_iter must be >= 1");
  }
};

struct ColumnSolution {
  Index j = -1;
  Eigen::VectorXd beta_col;  // length p; nonzero only on support \ {j}
  Eigen::VectorXd residual;  // X_j - X beta_col
  double objective = 0.0;    // 1/2 ||residual||^2 + lambda ||beta_col||^2
  double kkt_residual = 0.0;
  int sweeps = 0;
};

struct OracleResult {
  double value = 0.0;
  std::vector<ColumnSolution> columns;  // ascending j, one per z_j = 1
  Eigen::VectorXd subgrad;              // empty until computed

  const ColumnSolution* find(Index j) const {
    auto it = std::lower_bound(columns.begin(), columns.end(), j,
                               [](const ColumnSolution& c, Index k) { return c.j < k; });
    return (it != columns.end() && it->j == j) ? &*it : nullptr;
  }
};

// X^T X, either materialized or produced column by column on demand.
class CrossProducts {
 public:
  // Materializes the Gram matrix when n * p^2 <= flop_budget.
  explicit CrossProducts(const Dataset& data, double flop_budget = 4e9) : data_(data) {
    const double cost = static_cast<double>(data.n()) * static_cast<double>(data.p()) * static_cast<double>(data.p());
    full_ = cost <= flop_budget;
    if (full_) {
      gram_ = Eigen::MatrixXd::Zero(data.p(), data.p());
      gram_.selfadjointView<Eigen::Lower>().rankUpdate(data.X().transpose());
      gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();
    }
  }

  bool is_full() const noexcept { return full_; }

  // X^T X_j
  Eigen::VectorXd column(Index j) const {
    if (full_) return gram_.col(j);
    return data_.get().X().transpose() * data_.get().column(j);
  }

  double operator()(Index i, Index j) const {
    if (full_) return gram_(i, j);
    return data_.get().column(i).dot(data_.get().column(j));
  }

 private:
  std::reference_wrapper<const Dataset> data_;
  Eigen::MatrixXd gram_;
  bool full_ = false;
};

inline CrossProducts precompute_cross_products(const Dataset& data, double flop_budget = 4e9) {
  return CrossProducts(data, flop_budget);
}

// min 1/2 ||X_j - sum_{i in support, i != j} b_i X_i||^2 + lambda ||b||^2,
// |b_i| <= M, by cyclic coordinate descent with exact clipped updates.
inline ColumnSolution solve_column_qp(const Dataset& data, Index j, const IndexSet& support,
                                      const SubproblemConfig& cfg) {
  cfg.validate();
  const Index p = data.p();
  if (j < 0 || j >= p) throw ParameterError("solve_column_qp: column index out of range");
  if (!std::binary_search(support.begin(), support.end(), j)) {
    throw ParameterError("solve_column_qp: column " + std::to_string(j) + " is not in the support");
  }

  IndexSet vars;
  vars.reserve(support.size());
  for (Index i : support) {
    if (i < 0 || i >= p) throw ParameterError("solve_column_qp: support index out of range");
    if (i != j) vars.push_back(i);
  }

  const auto y = data.column(j);
  const double y_sq = data.column_sq_norms()[j];
  ColumnSolution sol;
  sol.j = j;
  sol.beta_col = Eigen::VectorXd::Zero(p);

  const auto m = static_cast<Index>(vars.size());
  if (m == 0 || y_sq == 0.0) {
    sol.residual = y;
    sol.objective = 0.5 * y_sq;
    return sol;
  }

  const Eigen::MatrixXd xs = data.X()(Eigen::all, vars);
  const Eigen::MatrixXd gram = xs.transpose() * xs;
  const Eigen::VectorXd corr = xs.transpose() * y;
  const double lam2 = 2.0 * cfg.lambda;
  const double big_m = cfg.big_m;
  const double tol = cfg.qp_tol * (1.0 + y_sq);

  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  // d = gradient of the smooth objective in b
  Eigen::VectorXd d = -corr;

  auto kkt_violation = [&](const Eigen::VectorXd& grad) {
    double worst = 0.0;
    for (Index k = 0; k < m; ++k) {
      double v;
      if (b[k] >= big_m) {
        v = std::max(grad[k], 0.0);
      } else if (b[k] <= -big_m) {
        v = std::max(-grad[k], 0.0);
      } else {
        v = std::abs(grad[k]);
      }
      worst = std::max(worst, v);
    }
    return worst;
  };

  double violation = kkt_violation(d);
  int sweep = 0;
  while (violation > tol) {
    if (sweep >= cfg.qp_max_iter) {
      throw ConvergenceError("solve_column_qp: column " + std::to_string(j) + " hit the iteration cap", violation);
    }
    ++sweep;
    for (Index k = 0; k < m; ++k) {
      const double h = gram(k, k) + lam2;
      if (h <= 0.0) continue;  // zero column with lambda = 0: coordinate is inert
      const double target = std::clamp(b[k] - d[k] / h, -big_m, big_m);
      const double delta = target - b[k];
      if (delta == 0.0) continue;
      b[k] = target;
      d.noalias() += delta * gram.col(k);
      d[k] += lam2 * delta;
    }
    d = gram * b - corr + lam2 * b;
    violation = kkt_violation(d);
  }

  for (Index k = 0; k < m; ++k) sol.beta_col[vars[static_cast<std::size_t>(k)]] = b[k];
  sol.residual = y - xs * b;
  sol.objective = 0.5 * sol.residual.squaredNorm() + cfg.lambda * b.squaredNorm();
  sol.kkt_residual = violation;
  sol.sweeps = sweep;
  return sol;
}

// F(z) and the per-column solutions; subgrad is left empty.
inline OracleResult evaluate_F(const Dataset& data, const BinaryVector& z, const SubproblemConfig& cfg) {
  cfg.validate();
  if (static_cast<Index>(z.size()) != data.p()) throw ParameterError("evaluate_F: z has wrong length");
  const IndexSet support = support_of(z);

  OracleResult out;
  out.columns.resize(support.size());
  parallel_for(support.size(), cfg.threads, [&](std::size_t k) {
    out.columns[k] = solve_column_qp(data, support[k], support, cfg);
  });

  // Summation order is fixed by column index so the value is identical for
  // any thread count.
  double value = 0.0;
  std::size_t next = 0;
  for (Index j = 0; j < data.p(); ++j) {
    if (next < support.size() && support[next] == j) {
      value += out.columns[next++].objective;
    } else {
      value += 0.5 * data.column_sq_norms()[j];
    }
  }
  out.value = value;
  return out;
}

// One member of the subdifferential of F at binary z. For every ordered pair
// (i, j), i != j, the box multiplier
//   mu_ij = |(X_{-j}^T alpha_j)_i - 2 lambda b_ij|
// (alpha_j the column residual, or X_j itself when z_j = 0) is charged
// M * mu_ij to whichever of z_i, z_j is zero, split in half when they agree.
// The perspective term adds lambda * b_ij^2 to the charge of z_j.
inline Eigen::VectorXd subgradient(const Dataset& data, const BinaryVector& z, const OracleResult& oracle,
                                   const SubproblemConfig& cfg, const CrossProducts& cross) {
  cfg.validate();
  const Index p = data.p();
  if (static_cast<Index>(z.size()) != p) throw ParameterError("subgradient: z has wrong length");
  const double big_m = cfg.big_m;
  const double lam = cfg.lambda;

  Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd q(p);
  for (Index j = 0; j < p; ++j) {
    const bool zj = z[static_cast<std::size_t>(j)] != 0;
    const ColumnSolution* col = nullptr;
    if (zj) {
      col = oracle.find(j);
      if (col == nullptr) throw ParameterError("subgradient: oracle is missing column " + std::to_string(j));
      q.noalias() = data.X().transpose() * col->residual;
    } else {
      q = cross.column(j);
    }
    q[j] = 0.0;

    for (Index i = 0; i < p; ++i) {
      if (i == j) continue;
      const bool zi = z[static_cast<std::size_t>(i)] != 0;
      if (zi && zj) {
        const double b = col->beta_col[i];
        const double half = 0.5 * big_m * std::abs(q[i] - 2.0 * lam * b);
        g[i] -= half;
        g[j] -= half + lam * b * b;
      } else if (!zi && !zj) {
        const double half = 0.5 * big_m * std::abs(q[i]);
        g[i] -= half;
        g[j] -= half;
      } else if (zi) {
        g[j] -= big_m * std::abs(q[i]);
      } else {
        g[i] -= big_m * std::abs(q[i]);
      }
    }
  }
  return g;
}

// F(z) with its subgradient filled in.
inline OracleResult evaluate_oracle(const Dataset& data, const BinaryVector& z, const SubproblemConfig& cfg,
                                    const CrossProducts& cross) {
  OracleResult out = evaluate_F(data, z, cfg);
  out.subgrad = subgradient(data, z, out, cfg, cross);
  return out;
}

}  // namespace spca

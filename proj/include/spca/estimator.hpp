#pragma once

// Principal-component estimate from a solved regression problem: residual
// variances, the matrix B_hat that carries the regression coefficients off
// the diagonal and the variance excess on it, and B_hat's leading left
// singular vector.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spca/dataset.hpp"
#include "spca/error.hpp"
#include "spca/outer_loop.hpp"
#include "spca/random.hpp"
#include "spca/support.hpp"

namespace spca {

struct EstimatorOutput {
  Eigen::VectorXd sigma_hat_sq;
  Eigen::MatrixXd B_hat;
  Eigen::VectorXd u_hat;
  IndexSet support;
  int power_iters_used = 0;
  // sigma_2 / sigma_1 of B_hat; near 1 means the leading direction is poorly separated.
  double spectral_ratio = 0.0;
  SolveResult solution;
};

struct PowerIterationOptions {
  double tol = 1e-10;
  int max_iters = 10000;
  std::uint64_t seed = 0;
};

// Flips u so that its first nonzero coordinate is nonnegative.
inline void fix_sign(Eigen::VectorXd& u) {
  for (Index i = 0; i < u.size(); ++i) {
    if (u[i] != 0.0) {
      if (u[i] < 0.0) u = -u;
      return;
    }
  }
}

// (1/n) ||X_i - sum_{j != i} beta_hat(j, i) X_j||^2 on the support of z_hat, 1 elsewhere.
inline Eigen::VectorXd sigma_hat(const Dataset& data, const SolveResult& result) {
  const Index p = data.p();
  if (static_cast<Index>(result.z_hat.size()) != p || result.beta_hat.rows() != p || result.beta_hat.cols() != p) {
    throw ParameterError("sigma_hat: result does not match the data dimensions");
  }
  const double n = static_cast<double>(data.n());
  Eigen::VectorXd out = Eigen::VectorXd::Ones(p);
  const IndexSet sup = support_of(result.z_hat);
  for (Index i : sup) {
    Eigen::VectorXd r = data.column(i);
    for (Index j : sup) {
      if (j != i && result.beta_hat(j, i) != 0.0) r -= result.beta_hat(j, i) * data.column(j);
    }
    out[i] = r.squaredNorm() / n;
  }
  return out;
}

inline Eigen::MatrixXd build_B_hat(const Eigen::MatrixXd& beta_hat, const Eigen::VectorXd& sigma_hat_sq) {
  const Index p = beta_hat.rows();
  if (beta_hat.cols() != p || sigma_hat_sq.size() != p) throw ParameterError("build_B_hat: dimension mismatch");
  if (beta_hat.diagonal().cwiseAbs().maxCoeff() != 0.0) throw ParameterError("build_B_hat: beta_hat diagonal must be zero");
  Eigen::MatrixXd b = beta_hat;
  b.diagonal() = sigma_hat_sq.array() - 1.0;
  return b;
}

struct PowerIterationResult {
  Eigen::VectorXd u;
  double sigma1_sq = 0.0;
  int iterations = 0;
};

// Power iteration on B B^T restricted to the nonzero rows of B.
inline PowerIterationResult leading_left_singular_vector_ex(const Eigen::MatrixXd& B, const PowerIterationOptions& opt = {}) {
  if (!(opt.tol > 0.0) || opt.max_iters < 1) throw ParameterError("leading_left_singular_vector: bad options");
  const Index p = B.rows();
  IndexSet rows;
  IndexSet cols;
  for (Index i = 0; i < p; ++i)
    if (B.row(i).cwiseAbs().maxCoeff() != 0.0) rows.push_back(i);
  for (Index j = 0; j < B.cols(); ++j)
    if (B.col(j).cwiseAbs().maxCoeff() != 0.0) cols.push_back(j);
  if (rows.empty()) throw DegenerateError("leading_left_singular_vector: B is all zero");

  const Eigen::MatrixXd sub = B(rows, cols);
  const Eigen::MatrixXd gram = sub * sub.transpose();
  const auto m = static_cast<Index>(rows.size());

  PowerIterationResult out;
  double residual = 0.0;
  for (int attempt = 0; attempt < 2; ++attempt) {
    Rng rng(combine_seed(opt.seed, 0x706f776572ULL + static_cast<std::uint64_t>(attempt)));
    Eigen::VectorXd v(m);
    for (Index i = 0; i < m; ++i) v[i] = rng.normal();
    v.normalize();

    bool stalled = false;
    for (int it = 1; it <= opt.max_iters; ++it) {
      ++out.iterations;
      Eigen::VectorXd w = gram * v;
      const double rayleigh = v.dot(w);
      if (!(rayleigh > 0.0) || w.norm() == 0.0) {
        stalled = true;
        break;
      }
      residual = (w - rayleigh * v).norm();
      if (residual <= opt.tol * rayleigh) {
        out.u = Eigen::VectorXd::Zero(p);
        for (Index k = 0; k < m; ++k) out.u[rows[static_cast<std::size_t>(k)]] = v[k];
        fix_sign(out.u);
        out.sigma1_sq = rayleigh;
        return out;
      }
      v = w / w.norm();
    }
    if (!stalled) {
      throw ConvergenceError("leading_left_singular_vector: no convergence in " + std::to_string(opt.max_iters) +
                                 " iterations",
                             residual);
    }
  }
  throw DegenerateError("leading_left_singular_vector: power iteration stalled twice");
}

inline Eigen::VectorXd leading_left_singular_vector(const Eigen::MatrixXd& B, double tol = 1e-10, int max_iters = 10000,
                                                    std::uint64_t seed = 0) {
  return leading_left_singular_vector_ex(B, PowerIterationOptions{tol, max_iters, seed}).u;
}

// solve -> sigma_hat -> B_hat -> leading left singular vector.
inline EstimatorOutput estimate(const Dataset& data, const SolverConfig& cfg, const LambdaMode& lambda = LambdaMode::zero()) {
  EstimatorOutput out;
  out.solution = solve(data, cfg, lambda);
  out.support = support_of(out.solution.z_hat);
  out.sigma_hat_sq = sigma_hat(data, out.solution);
  out.B_hat = build_B_hat(out.solution.beta_hat, out.sigma_hat_sq);

  if (out.B_hat.cwiseAbs().maxCoeff() == 0.0) {
    // Nothing to decompose: fall back to the highest-variance selected column.
    const IndexSet& pool = out.support.empty() ? variance_order(data) : out.support;
    Index pick = pool.front();
    for (Index i : pool)
      if (data.column_sq_norms()[i] > data.column_sq_norms()[pick]) pick = i;
    out.u_hat = Eigen::VectorXd::Unit(data.p(), pick);
    return out;
  }

  const PowerIterationResult pw = leading_left_singular_vector_ex(out.B_hat, PowerIterationOptions{1e-10, 10000, cfg.seed});
  out.u_hat = pw.u;
  out.power_iters_used = pw.iterations;
  if (out.support.size() > 1) {
    const Eigen::MatrixXd block = out.B_hat(out.support, out.support);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(block);
    const auto sv = svd.singularValues();
    out.spectral_ratio = sv[0] > 0.0 ? sv[1] / sv[0] : 0.0;
  }
  return out;
}

}  // namespace spca

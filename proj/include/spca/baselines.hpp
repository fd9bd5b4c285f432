#pragma once

// Reference sparse PCA methods: the truncated power method and covariance
// thresholding.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spca/dataset.hpp"
#include "spca/error.hpp"
#include "spca/estimator.hpp"
#include "spca/random.hpp"
#include "spca/spiked_model.hpp"
#include "spca/support.hpp"

namespace spca {

struct BaselineResult {
  Eigen::VectorXd u_hat;
  IndexSet support;
  int iterations = 0;
  std::string method;
  std::vector<double> objective_trace;  // v^T Sigma v after each step (truncated power)
  double threshold = 0.0;               // covariance thresholding only
  Index surviving_off_diagonal = 0;     // covariance thresholding only
  bool threshold_fallback = false;      // p <= s^2 forced tau = 0
};

inline Eigen::MatrixXd sample_covariance(const Dataset& data) {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(data.p(), data.p());
  cov.selfadjointView<Eigen::Lower>().rankUpdate(data.X().transpose(), 1.0 / static_cast<double>(data.n()));
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  return cov;
}

// Indices of the s largest |v_i|, sorted ascending; the smaller index wins ties.
inline IndexSet top_s_indices(const Eigen::VectorXd& v, Index s) {
  IndexSet order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return std::abs(v[a]) > std::abs(v[b]); });
  order.resize(static_cast<std::size_t>(std::min<Index>(s, v.size())));
  std::sort(order.begin(), order.end());
  return order;
}

inline BaselineResult truncated_power_method(const Eigen::MatrixXd& sigma, Index s, const Eigen::VectorXd& init,
                                             int max_iters = 1000, double tol = 1e-10) {
  const Index p = sigma.rows();
  if (sigma.cols() != p) throw ParameterError("truncated_power_method: covariance must be square");
  if (s < 1) throw ParameterError("truncated_power_method: s must be >= 1");
  if (init.size() != p || std::abs(init.norm() - 1.0) > 1e-8) throw ParameterError("truncated_power_method: init must be a unit vector of length p");
  if (max_iters < 1) throw ParameterError("truncated_power_method: max_iters must be >= 1");

  BaselineResult out;
  out.method = "truncated_power";
  Eigen::VectorXd v = init.normalized();
  for (int it = 1; it <= max_iters; ++it) {
    const Eigen::VectorXd w = sigma * v;
    const IndexSet keep = top_s_indices(w, s);
    Eigen::VectorXd next = Eigen::VectorXd::Zero(p);
    for (Index i : keep) next[i] = w[i];
    const double norm = next.norm();
    if (norm == 0.0) throw DegenerateError("truncated_power_method: iterate vanished after truncation");
    next /= norm;
    out.iterations = it;
    out.support = keep;
    out.objective_trace.push_back(next.dot(sigma * next));
    const double change = sin_angle(next, v);
    v = std::move(next);
    if (change <= tol) break;
  }
  fix_sign(v);
  out.u_hat = std::move(v);
  return out;
}

inline BaselineResult truncated_power_method(const Dataset& data, Index s, const Eigen::VectorXd& init,
                                             int max_iters = 1000, double tol = 1e-10) {
  return truncated_power_method(sample_covariance(data), s, init, max_iters, tol);
}

// Starts from e_j with j uniform in [p]; draws a new j if the iterate vanishes.
inline BaselineResult truncated_power_method_random_start(const Dataset& data, Index s, std::uint64_t seed,
                                                          int max_iters = 1000, double tol = 1e-10) {
  const Eigen::MatrixXd sigma = sample_covariance(data);
  Rng rng(combine_seed(seed, 0x7470ULL));
  const Index p = data.p();
  for (Index attempt = 0; attempt < p; ++attempt) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(p)));
    try {
      return truncated_power_method(sigma, s, Eigen::VectorXd::Unit(p, j), max_iters, tol);
    } catch (const DegenerateError&) {
    }
  }
  throw DegenerateError("truncated_power_method: every restart vanished");
}

// Zeroes off-diagonal entries with |value| < tau; the diagonal is kept.
inline Eigen::MatrixXd hard_threshold(const Eigen::MatrixXd& sigma, double tau, Index* surviving = nullptr) {
  Eigen::MatrixXd out = sigma;
  Index kept = 0;
  for (Index j = 0; j < out.cols(); ++j) {
    for (Index i = 0; i < out.rows(); ++i) {
      if (i == j) continue;
      if (std::abs(out(i, j)) < tau) {
        out(i, j) = 0.0;
      } else {
        ++kept;
      }
    }
  }
  if (surviving != nullptr) *surviving = kept;
  return out;
}

inline BaselineResult covariance_thresholding(const Eigen::MatrixXd& sigma, Index n, Index s, double alpha) {
  const Index p = sigma.rows();
  if (sigma.cols() != p) throw ParameterError("covariance_thresholding: covariance must be square");
  if (!(alpha >= 0.0)) throw ParameterError("covariance_thresholding: alpha must be >= 0");
  if (s < 1 || n < 1) throw ParameterError("covariance_thresholding: need s >= 1 and n >= 1");

  BaselineResult out;
  out.method = "cov_threshold";
  const double ratio = static_cast<double>(p) / (static_cast<double>(s) * static_cast<double>(s));
  if (ratio <= 1.0) {
    out.threshold_fallback = true;
    out.threshold = 0.0;
  } else {
    out.threshold = alpha * std::sqrt(std::log(ratio) / static_cast<double>(n));
  }
  const Eigen::MatrixXd thresholded = hard_threshold(sigma, out.threshold, &out.surviving_off_diagonal);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(thresholded);
  if (eig.info() != Eigen::Success) throw ConvergenceError("covariance_thresholding: eigensolver failed", 0.0);
  Eigen::VectorXd u = eig.eigenvectors().col(p - 1);
  u.normalize();
  fix_sign(u);
  for (Index i = 0; i < p; ++i)
    if (std::abs(u[i]) > 1e-8) out.support.push_back(i);
  out.u_hat = std::move(u);
  out.iterations = 1;
  return out;
}

inline BaselineResult covariance_thresholding(const Dataset& data, Index s, double alpha) {
  return covariance_thresholding(sample_covariance(data), data.n(), s, alpha);
}

}  // namespace spca

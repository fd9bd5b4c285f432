#pragma once

// Spiked covariance ground truth: x ~ N(0, I + theta * u u^T) with a sparse
// unit vector u. Also hosts the population regression coefficients implied
// by the model and the two evaluation metrics used throughout.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spca/dataset.hpp"
#include "spca/error.hpp"
#include "spca/random.hpp"
#include "spca/support.hpp"

namespace spca {

struct SpikedModel {
  Index p = 0;
  Index s_true = 0;
  double theta = 1.0;
  std::uint64_t seed = 0;
  Eigen::VectorXd u_star;

  IndexSet support() const {
    IndexSet out;
    for (Index i = 0; i < u_star.size(); ++i) {
      if (u_star[i] != 0.0) out.push_back(i);
    }
    return out;
  }
};

struct PopulationCoefficients {
  Eigen::MatrixXd beta_star;      // p x p, zero diagonal; column j regresses x_j on the rest
  Eigen::VectorXd sigma_star_sq;  // conditional variances
  Eigen::MatrixXd B_star;         // theta/(1+theta) u u^T D
  Eigen::VectorXd D_diag;
};

struct ModelOptions {
  // Attach an independent random sign to each nonzero entry of u*.
  bool random_signs = false;
};

// s coordinates chosen uniformly without replacement carry Unif(0,1] draws;
// the vector is then normalized.
inline SpikedModel make_model(Index p, Index s, double theta, std::uint64_t seed,
                              ModelOptions options = {}) {
  if (p < 1) throw ParameterError("make_model: p must be >= 1");
  if (s < 1 || s > p) throw ParameterError("make_model: need 1 <= s <= p");
  if (!(theta > 0.0 && theta <= 1.0)) throw ParameterError("make_model: theta must lie in (0, 1]");

  Rng rng(combine_seed(seed, 0x6d6f64656cULL));
  std::vector<Index> perm(static_cast<std::size_t>(p));
  std::iota(perm.begin(), perm.end(), Index{0});
  // Partial Fisher-Yates: the first s slots end up a uniform s-subset.
  for (Index k = 0; k < s; ++k) {
    const auto r = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(p - k)));
    std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(r)]);
  }

  SpikedModel m;
  m.p = p;
  m.s_true = s;
  m.theta = theta;
  m.seed = seed;
  m.u_star = Eigen::VectorXd::Zero(p);
  for (Index k = 0; k < s; ++k) {
    double v = rng.uniform_open_zero();
    if (options.random_signs && (rng.next_u64() & 1U)) v = -v;
    m.u_star[perm[static_cast<std::size_t>(k)]] = v;
  }
  m.u_star /= m.u_star.norm();
  return m;
}

// Rows are x = g + sqrt(theta) * xi * u* with g ~ N(0, I_p), xi ~ N(0, 1).
inline Dataset sample_data(const SpikedModel& model, Index n, std::uint64_t seed) {
  if (n < 2) throw ParameterError("sample_data: n must be >= 2");
  const Index p = model.p;
  Rng rng(combine_seed(seed, 0x64617461ULL));
  const double scale = std::sqrt(model.theta);
  Eigen::MatrixXd x(n, p);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < p; ++c) x(r, c) = rng.normal();
    const double xi = rng.normal();
    x.row(r) += (scale * xi) * model.u_star.transpose();
  }
  return Dataset(std::move(x));
}

inline PopulationCoefficients population_coefficients(const SpikedModel& model) {
  const Index p = model.p;
  const double th = model.theta;
  const Eigen::VectorXd& u = model.u_star;

  PopulationCoefficients pc;
  pc.beta_star = Eigen::MatrixXd::Zero(p, p);
  pc.sigma_star_sq.resize(p);
  pc.D_diag.resize(p);
  for (Index j = 0; j < p; ++j) {
    const double denom = 1.0 + th - th * u[j] * u[j];
    for (Index i = 0; i < p; ++i) {
      if (i != j) pc.beta_star(i, j) = th * u[i] * u[j] / denom;
    }
    pc.sigma_star_sq[j] = 1.0 + th * u[j] * u[j] / denom;
    pc.D_diag[j] = 1.0 / (1.0 - (th / (1.0 + th)) * u[j] * u[j]);
  }
  pc.B_star = (th / (1.0 + th)) * (u * u.transpose()) * pc.D_diag.asDiagonal();
  return pc;
}

namespace detail {

inline Eigen::VectorXd checked_unit(const Eigen::VectorXd& v, const char* who) {
  const double norm = v.norm();
  if (!(std::abs(norm - 1.0) <= 1e-8)) {
    throw NormalizationError(std::string(who) + ": input is not unit norm (norm " + std::to_string(norm) + ")");
  }
  return v / norm;
}

}  // namespace detail

// sqrt(1 - (a^T b)^2); sign and order invariant. Evaluated as the norm of
// a - (a^T b) b, which keeps full relative accuracy for nearly parallel
// vectors where 1 - c^2 cancels.
inline double sin_angle(const Eigen::VectorXd& u_hat, const Eigen::VectorXd& u_star) {
  if (u_hat.size() != u_star.size()) throw ParameterError("sin_angle: dimension mismatch");
  const Eigen::VectorXd a = detail::checked_unit(u_hat, "sin_angle");
  const Eigen::VectorXd b = detail::checked_unit(u_star, "sin_angle");
  return std::clamp((a - a.dot(b) * b).norm(), 0.0, 1.0);
}

// (#missed + #false alarms) / 2.
inline double support_error(const IndexSet& s_hat, const IndexSet& s_star) {
  IndexSet a = s_hat, b = s_star;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  IndexSet diff;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
  return static_cast<double>(diff.size()) / 2.0;
}

}  // namespace spca

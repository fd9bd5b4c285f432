#pragma once

#include <Eigen/Dense>

#include "spca/error.hpp"
#include "spca/support.hpp"

namespace spca {

// n x p sample matrix (rows are observations) with cached column norms.
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(Eigen::MatrixXd x) : x_(std::move(x)) {
    if (x_.rows() < 1 || x_.cols() < 1) throw ParameterError("dataset must be non-empty");
    column_sq_norms_ = x_.colwise().squaredNorm().transpose();
  }

  const Eigen::MatrixXd& X() const noexcept { return x_; }
  const Eigen::VectorXd& column_sq_norms() const noexcept { return column_sq_norms_; }
  Index n() const noexcept { return x_.rows(); }
  Index p() const noexcept { return x_.cols(); }

  auto column(Index j) const { return x_.col(j); }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd column_sq_norms_;
};

}  // namespace spca

#pragma once

#include <Eigen/Dense>

#include <vector>

namespace degrade {

/// Trapezoid quadrature weights on an ascending grid.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> trapezoid_weights(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grid) {
  const Eigen::Index n = grid.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
  for (Eigen::Index g = 0; g + 1 < n; ++g) {
    const Scalar half = (grid(g + 1) - grid(g)) / Scalar(2);
    w(g) += half;
    w(g + 1) += half;
  }
  return w;
}

/// Karhunen-Loeve model of one functional covariate on a shared grid.
///
/// Eigenfunctions are orthonormal under <f, g> = (1/R) * integral f g dr, so a
/// score is c_k = <Z - mean, psi_k> and integral alpha Z dr = R * sum_k b_k c_k
/// holds exactly for truncated expansions. Eigenvalues are the (1/N) sample
/// variances of the scores.
struct FpcaModel {
  Eigen::VectorXd r_grid;
  Eigen::VectorXd mean_curve;
  Eigen::MatrixXd eigenfunctions;  // grid x K_full, one column per component
  Eigen::VectorXd eigenvalues;     // descending, nonnegative
  Eigen::VectorXd fve_trace;       // cumulative variance fraction
  Eigen::Index K = 0;              // selected truncation
  double R = 0.0;

  Eigen::Index full_rank() const { return eigenvalues.size(); }
  // Quadrature weights of the (1/R)-scaled inner product.
  Eigen::VectorXd inner_product_weights() const;
};

// Rows of `curves` are units, columns grid points.
FpcaModel fit_fpca(const Eigen::MatrixXd& curves, const Eigen::VectorXd& r_grid, double fve = 0.95);

Eigen::Index select_k_by_fve(const FpcaModel& model, double threshold);

// N x K_full score matrix.
Eigen::MatrixXd project_scores(const FpcaModel& model, const Eigen::MatrixXd& curves);

// Rows are units; uses the first K columns of `scores`.
Eigen::MatrixXd reconstruct(const FpcaModel& model, const Eigen::MatrixXd& scores, Eigen::Index K);

/// Per-unit S x K score blocks c_isk.
struct ScoreSet {
  Eigen::Index S = 0;
  Eigen::Index K = 0;
  std::vector<Eigen::MatrixXd> per_unit;
};

}  // namespace degrade

#include "degrade/fpca.hpp"

#include "degrade/errors.hpp"

#include <cmath>

namespace degrade {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd FpcaModel::inner_product_weights() const {
  return trapezoid_weights<double>(r_grid) / R;
}

FpcaModel fit_fpca(const MatrixXd& curves, const VectorXd& r_grid, double fve) {
  const Index N = curves.rows();
  const Index G = curves.cols();
  if (N < 2) throw ValidationError("fit_fpca: need at least 2 curves");
  if (G != r_grid.size() || G < 2) throw ValidationError("fit_fpca: curves do not match the grid");
  if (!curves.allFinite()) throw ValidationError("fit_fpca: non-finite curve values");

  FpcaModel model;
  model.r_grid = r_grid;
  model.R = r_grid(G - 1) - r_grid(0);
  if (!(model.R > 0.0)) throw ValidationError("fit_fpca: grid must be ascending");
  model.mean_curve = curves.colwise().mean().transpose();

  const VectorXd w = model.inner_product_weights();
  const VectorXd sqrt_w = w.array().sqrt();
  const MatrixXd centered = curves.rowwise() - model.mean_curve.transpose();
  // Symmetrized operator W^1/2 C W^1/2 shares eigenvalues with C W.
  const MatrixXd weighted = centered * sqrt_w.asDiagonal();
  const MatrixXd op = (weighted.transpose() * weighted) / static_cast<double>(N);

  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(op);
  if (solver.info() != Eigen::Success) throw NumericalError("fit_fpca: eigensolver failed");
  const VectorXd ascending = solver.eigenvalues();
  const double top = std::max(ascending(G - 1), 0.0);
  const double level = w.dot(model.mean_curve.cwiseAbs2());
  if (top <= 1e-20 * std::max(1.0, level)) throw NumericalError("fit_fpca: degenerate covariance");

  Index kept = 0;
  for (Index g = G - 1; g >= 0 && ascending(g) > 1e-12 * top; --g) ++kept;

  model.eigenvalues.resize(kept);
  model.eigenfunctions.resize(G, kept);
  for (Index k = 0; k < kept; ++k) {
    const Index src = G - 1 - k;
    model.eigenvalues(k) = ascending(src);
    VectorXd psi = solver.eigenvectors().col(src).cwiseQuotient(sqrt_w);
    Index arg = 0;
    psi.cwiseAbs().maxCoeff(&arg);
    if (psi(arg) < 0.0) psi = -psi;
    model.eigenfunctions.col(k) = psi;
  }

  model.fve_trace.resize(kept);
  double cumulative = 0.0;
  for (Index k = 0; k < kept; ++k) {
    cumulative += model.eigenvalues(k);
    model.fve_trace(k) = cumulative;
  }
  model.fve_trace /= cumulative;
  model.K = select_k_by_fve(model, fve);
  return model;
}

Index select_k_by_fve(const FpcaModel& model, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ValidationError("FVE threshold must lie in (0, 1]");
  for (Index k = 0; k < model.fve_trace.size(); ++k)
    if (model.fve_trace(k) >= threshold) return k + 1;
  return model.fve_trace.size();
}

MatrixXd project_scores(const FpcaModel& model, const MatrixXd& curves) {
  if (curves.cols() != model.r_grid.size()) throw ValidationError("project_scores: grid mismatch");
  const VectorXd w = model.inner_product_weights();
  return ((curves.rowwise() - model.mean_curve.transpose()) * w.asDiagonal()) * model.eigenfunctions;
}

MatrixXd reconstruct(const FpcaModel& model, const MatrixXd& scores, Index K) {
  if (K < 0 || K > model.full_rank() || scores.cols() < K)
    throw ValidationError("reconstruct: K exceeds the available components");
  MatrixXd out = scores.leftCols(K) * model.eigenfunctions.leftCols(K).transpose();
  out.rowwise() += model.mean_curve.transpose();
  return out;
}

}  // namespace degrade

#include "degrade/estimator.hpp"

#include "degrade/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace degrade {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kSigmaEpsFloor = 1e-16;
constexpr double kSigmaGammaFloor = 1e-12;  // relative to trace
constexpr double kRankThreshold = 1e-10;

// Sigma_gamma^{-1} after flooring its eigenvalues at 1e-12 * trace.
MatrixXd floored_inverse(const MatrixXd& sigma_gamma) {
  const double trace = sigma_gamma.trace();
  if (!(trace > 0.0) || !std::isfinite(trace)) throw NumericalError("singular Sigma_gamma after flooring");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sigma_gamma);
  if (eig.info() != Eigen::Success) throw NumericalError("Sigma_gamma eigendecomposition failed");
  const VectorXd inv = eig.eigenvalues().cwiseMax(kSigmaGammaFloor * trace).cwiseInverse();
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

FixedEffectSolver::FixedEffectSolver(const DesignMatrices& designs, bool ridge) : ridge_(ridge) {
  const MatrixXd& omega = designs.omega;
  const Index U = omega.cols();
  if (omega.rows() < U && !ridge)
    throw NumericalError("rank-deficient design: " + std::to_string(omega.rows()) + " observations for " +
                         std::to_string(U) + " coefficients");
  if (ridge) {
    MatrixXd gram = omega.transpose() * omega;
    const double jitter = 1e-8 * gram.trace() / static_cast<double>(U);
    gram.diagonal().array() += jitter;
    ridge_ldlt_.compute(gram);
    if (ridge_ldlt_.info() != Eigen::Success) throw NumericalError("ridge normal equations failed");
    omega_t_ = omega.transpose();
    return;
  }
  // Unit-norm columns so the rank threshold does not depend on covariate units.
  col_scale_ = omega.colwise().norm().transpose();
  std::string bad;
  for (Index k = 0; k < U; ++k)
    if (col_scale_(k) == 0.0) bad += (bad.empty() ? "" : ", ") + designs.layout.column_name(k);
  if (!bad.empty()) throw NumericalError("rank-deficient design; dependent columns: " + bad);
  qr_.setThreshold(kRankThreshold);
  qr_.compute(omega * col_scale_.cwiseInverse().asDiagonal());
  const Index rank = qr_.rank();
  for (Index k = rank; k < U; ++k)
    bad += (bad.empty() ? "" : ", ") + designs.layout.column_name(qr_.colsPermutation().indices()(k));
  if (!bad.empty()) throw NumericalError("rank-deficient design; dependent columns: " + bad);
}

VectorXd FixedEffectSolver::solve(const VectorXd& rhs) const {
  if (ridge_) return ridge_ldlt_.solve(omega_t_ * rhs);
  return qr_.solve(rhs).cwiseQuotient(col_scale_);
}

Parameters init_params(const DesignMatrices& designs, bool ridge) {
  const FixedEffectSolver solver(designs, ridge);
  Parameters p;
  p.zeta = solver.solve(designs.y);
  const VectorXd resid = designs.y - designs.omega * p.zeta;
  p.sigma_eps2 = std::max(resid.squaredNorm() / static_cast<double>(designs.num_observations()), kSigmaEpsFloor);
  p.sigma_gamma = 0.1 * p.sigma_eps2 * MatrixXd::Identity(designs.latent_dim, designs.latent_dim);
  return p;
}

LatentPosterior e_step(const Parameters& params, const DesignMatrices& designs) {
  const Index q = designs.latent_dim;
  LatentPosterior post;
  post.mu.reserve(designs.units.size());
  post.V.reserve(designs.units.size());
  if (q == 0) {
    for (std::size_t i = 0; i < designs.units.size(); ++i) {
      post.mu.emplace_back(0);
      post.V.emplace_back(0, 0);
    }
    return post;
  }
  const MatrixXd prior_precision = floored_inverse(params.sigma_gamma);
  const double inv_s2 = 1.0 / params.sigma_eps2;
  for (const auto& u : designs.units) {
    const MatrixXd precision = prior_precision + inv_s2 * (u.latent.transpose() * u.latent);
    Eigen::LLT<MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) throw NumericalError("posterior precision not positive definite");
    MatrixXd V = llt.solve(MatrixXd::Identity(q, q));
    V = 0.5 * (V + V.transpose());
    const VectorXd resid = u.y - u.observed * params.zeta;
    post.mu.push_back(inv_s2 * (V * (u.latent.transpose() * resid)));
    post.V.push_back(std::move(V));
  }
  return post;
}

VectorXd update_zeta(const LatentPosterior& posterior, const DesignMatrices& designs,
                     const FixedEffectSolver& solver) {
  VectorXd adjusted = designs.y;
  if (designs.latent_dim > 0)
    for (std::size_t i = 0; i < designs.units.size(); ++i) {
      const auto& u = designs.units[i];
      adjusted.segment(designs.row_offsets[i], u.y.size()) -= u.latent * posterior.mu[i];
    }
  return solver.solve(adjusted);
}

VectorXd update_zeta(const LatentPosterior& posterior, const DesignMatrices& designs) {
  return update_zeta(posterior, designs, FixedEffectSolver(designs, false));
}

MatrixXd update_sigma_gamma(const LatentPosterior& posterior, bool constrain_diagonal) {
  if (posterior.mu.empty()) return {};
  const Index q = posterior.mu.front().size();
  MatrixXd sum = MatrixXd::Zero(q, q);
  for (std::size_t i = 0; i < posterior.mu.size(); ++i) sum += posterior.second_moment(i);
  MatrixXd out = sum / static_cast<double>(posterior.mu.size());
  out = 0.5 * (out + out.transpose());
  if (constrain_diagonal) out = MatrixXd(out.diagonal().asDiagonal());
  return out;
}

double update_sigma_eps(const LatentPosterior& posterior, const VectorXd& zeta, const DesignMatrices& designs) {
  // ||r||^2 - 2 r^T Lambda mu + Tr(Lambda^T Lambda (V + mu mu^T)) regrouped as
  // ||r - Lambda mu||^2 + Tr(Lambda^T Lambda V), which avoids cancellation.
  double total = 0.0;
  for (std::size_t i = 0; i < designs.units.size(); ++i) {
    const auto& u = designs.units[i];
    VectorXd resid = u.y - u.observed * zeta;
    if (designs.latent_dim > 0) {
      resid -= u.latent * posterior.mu[i];
      total += (u.latent.transpose() * u.latent).cwiseProduct(posterior.V[i]).sum();
    }
    total += resid.squaredNorm();
  }
  return std::max(total / static_cast<double>(designs.num_observations()), kSigmaEpsFloor);
}

double marginal_loglik(const Parameters& params, const DesignMatrices& designs) {
  const Index q = designs.latent_dim;
  if (q > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(params.sigma_gamma, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, params.sigma_gamma.trace()))
      throw NumericalError("Sigma_gamma is not positive semidefinite");
  }
  constexpr double log_2pi = 1.8378770664093454835606594728112;
  double total = 0.0;
  for (const auto& u : designs.units) {
    const Index m = u.y.size();
    const VectorXd resid = u.y - u.observed * params.zeta;
    MatrixXd cov = params.sigma_eps2 * MatrixXd::Identity(m, m);
    if (q > 0) cov.noalias() += u.latent * params.sigma_gamma * u.latent.transpose();
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("marginal covariance is not positive definite");
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const VectorXd white = llt.matrixL().solve(resid);
    total += -0.5 * (static_cast<double>(m) * log_2pi + logdet + white.squaredNorm());
  }
  return total;
}

QTerms q_terms(const Parameters& theta, const LatentPosterior& posterior, const DesignMatrices& designs) {
  QTerms q;
  const auto n = static_cast<double>(designs.num_observations());
  const bool latent = designs.latent_dim > 0;
  double sq = 0.0, trace = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < designs.units.size(); ++i) {
    const auto& u = designs.units[i];
    const VectorXd resid = u.y - u.observed * theta.zeta;
    sq += resid.squaredNorm();
    if (latent) {
      trace += (u.latent.transpose() * u.latent * posterior.second_moment(i)).trace();
      cross += resid.dot(u.latent * posterior.mu[i]);
    }
  }
  q.data = -0.5 * n * std::log(theta.sigma_eps2) - (sq + trace - 2.0 * cross) / (2.0 * theta.sigma_eps2);
  if (latent) {
    Eigen::LLT<MatrixXd> llt(theta.sigma_gamma);
    if (llt.info() != Eigen::Success) {
      q.latent = -std::numeric_limits<double>::infinity();
      return q;
    }
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    double quad = 0.0;
    for (std::size_t i = 0; i < posterior.mu.size(); ++i) quad += llt.solve(posterior.second_moment(i)).trace();
    q.latent = -0.5 * static_cast<double>(posterior.mu.size()) * logdet - 0.5 * quad;
  }
  return q;
}

double q_value(const Parameters& theta, const LatentPosterior& posterior, const DesignMatrices& designs) {
  return q_terms(theta, posterior, designs).total();
}

double q_value(const Parameters& theta, const Parameters& previous, const DesignMatrices& designs) {
  return q_value(theta, e_step(previous, designs), designs);
}

Parameters em_iteration(const Parameters& params, const DesignMatrices& designs, const FixedEffectSolver& solver,
                        const FitOptions& options) {
  const LatentPosterior post = e_step(params, designs);
  Parameters next;
  next.zeta = update_zeta(post, designs, solver);
  next.sigma_gamma = update_sigma_gamma(post, options.constrain_sigma_gamma_diagonal);
  if (options.staging == SigmaEpsStaging::printed && designs.latent_dim > 0) {
    LatentPosterior staged = post;
    const MatrixXd prior_precision = floored_inverse(next.sigma_gamma);
    for (std::size_t i = 0; i < designs.units.size(); ++i) {
      const auto& lam = designs.units[i].latent;
      const MatrixXd precision = prior_precision + (lam.transpose() * lam) / params.sigma_eps2;
      staged.V[i] = precision.llt().solve(MatrixXd::Identity(designs.latent_dim, designs.latent_dim));
    }
    next.sigma_eps2 = update_sigma_eps(staged, next.zeta, designs);
  } else {
    next.sigma_eps2 = update_sigma_eps(post, next.zeta, designs);
  }
  return next;
}

FitResult fit_em(const DesignMatrices& designs, const FitOptions& options) {
  if (designs.units.empty()) throw ValidationError("fit_em: no units");
  const FixedEffectSolver solver(designs, options.ridge);
  FitResult result;
  result.params = options.initial ? *options.initial : init_params(designs, options.ridge);
  if (result.params.zeta.size() != designs.layout.U() ||
      result.params.sigma_gamma.rows() != designs.latent_dim)
    throw ValidationError("fit_em: initial parameters do not match the design");

  double ll = marginal_loglik(result.params, designs);
  if (!std::isfinite(ll)) throw NumericalError("non-finite log-likelihood at initialization");
  result.loglik_trace.push_back(ll);

  for (int it = 1; it <= options.max_iter; ++it) {
    result.params = em_iteration(result.params, designs, solver, options);
    const double next = marginal_loglik(result.params, designs);
    if (!std::isfinite(next))
      throw NumericalError("non-finite log-likelihood at iteration " + std::to_string(it));
    result.loglik_trace.push_back(next);
    result.iterations = it;
    const double change = std::abs(next - ll) / std::max(std::abs(next), 1e-300);
    ll = next;
    if (change < options.tol) {
      result.converged = true;
      break;
    }
  }
  result.posterior = e_step(result.params, designs);
  return result;
}

Index count_parameters(const DesignMatrices& designs, bool constrain_diagonal) {
  const Index q = designs.latent_dim;
  const Index gamma = constrain_diagonal ? q : q * (q + 1) / 2;
  return designs.layout.U() + 1 + gamma;
}

}  // namespace degrade

#pragma once

#include "degrade/design.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace degrade {

/// Theta = {zeta, sigma_eps^2, Sigma_gamma}.
struct Parameters {
  Eigen::VectorXd zeta;
  double sigma_eps2 = 1.0;
  Eigen::MatrixXd sigma_gamma;  // q x q
};

/// Per-unit Gaussian posterior of the latent effects: gamma_i | y_i ~ N(mu_i, V_i).
struct LatentPosterior {
  std::vector<Eigen::VectorXd> mu;
  std::vector<Eigen::MatrixXd> V;

  // E[gamma_i gamma_i^T | y_i]
  Eigen::MatrixXd second_moment(std::size_t i) const { return V[i] + mu[i] * mu[i].transpose(); }
};

/// Which Sigma_gamma the sigma_eps^2 update feeds into V_i.
enum class SigmaEpsStaging {
  posterior,  // V_i from the E-step of this iteration (exact maximizer of Q)
  printed     // V_i rebuilt from the freshly updated Sigma_gamma and the previous sigma_eps^2
};

struct FitOptions {
  int max_iter = 500;
  double tol = 1e-8;  // relative change of the marginal log-likelihood
  bool constrain_sigma_gamma_diagonal = false;
  bool ridge = false;
  SigmaEpsStaging staging = SigmaEpsStaging::posterior;
  std::optional<Parameters> initial;
};

struct FitResult {
  Parameters params;
  LatentPosterior posterior;         // E-step at the final parameters
  std::vector<double> loglik_trace;  // entry 0 is the initial value
  int iterations = 0;
  bool converged = false;

  double loglik() const { return loglik_trace.back(); }
};

/// Least-squares solver for the fixed-effect design, factorized once per fit.
/// Rank deficiency throws NumericalError naming the dependent columns unless
/// ridge jitter is requested.
class FixedEffectSolver {
 public:
  FixedEffectSolver(const DesignMatrices& designs, bool ridge);
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  bool ridge_ = false;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::LDLT<Eigen::MatrixXd> ridge_ldlt_;
  Eigen::MatrixXd omega_t_;
  Eigen::VectorXd col_scale_;
};

Parameters init_params(const DesignMatrices& designs, bool ridge = false);

LatentPosterior e_step(const Parameters& params, const DesignMatrices& designs);

Eigen::VectorXd update_zeta(const LatentPosterior& posterior, const DesignMatrices& designs,
                            const FixedEffectSolver& solver);
Eigen::VectorXd update_zeta(const LatentPosterior& posterior, const DesignMatrices& designs);

Eigen::MatrixXd update_sigma_gamma(const LatentPosterior& posterior, bool constrain_diagonal);

double update_sigma_eps(const LatentPosterior& posterior, const Eigen::VectorXd& zeta,
                        const DesignMatrices& designs);

// Sum over units of log N(y_i; Omega_i zeta, Lambda_i Sigma_gamma Lambda_i^T + sigma^2 I).
double marginal_loglik(const Parameters& params, const DesignMatrices& designs);

/// Expected complete-data log-likelihood split into its two factors
/// (constants dropped).
struct QTerms {
  double data = 0.0;    // l_1: zeta and sigma_eps^2
  double latent = 0.0;  // l_2: Sigma_gamma
  double total() const { return data + latent; }
};

// Q(theta | posterior); the posterior carries the expectations at the previous iterate.
QTerms q_terms(const Parameters& theta, const LatentPosterior& posterior, const DesignMatrices& designs);
double q_value(const Parameters& theta, const LatentPosterior& posterior, const DesignMatrices& designs);
double q_value(const Parameters& theta, const Parameters& previous, const DesignMatrices& designs);

// One E-step followed by the sequential M-step updates.
Parameters em_iteration(const Parameters& params, const DesignMatrices& designs, const FixedEffectSolver& solver,
                        const FitOptions& options);

FitResult fit_em(const DesignMatrices& designs, const FitOptions& options = {});

// Number of free parameters: U + 1 + free entries of Sigma_gamma.
Eigen::Index count_parameters(const DesignMatrices& designs, bool constrain_diagonal);

}  // namespace degrade

#pragma once

#include "degrade/datamodel.hpp"
#include "degrade/fpca.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace degrade {

/// Generative description of a synthetic degradation study. `zeta` follows
/// the ZetaLayout of (levels, P, S, K_true) with the include_* switches.
struct SyntheticSpec {
  Eigen::Index N = 60;
  Eigen::Index m = 30;
  BasisFamily basis{BasisKind::polynomial, 1};
  bool center_baseline = true;  // drop l = 0; first time is 0 with a zero baseline reading
  Eigen::Index P = 1;
  Eigen::Index S = 1;
  Eigen::Index K_true = 2;
  bool include_scalar = true;
  bool include_functional = true;
  bool include_interaction = true;
  bool include_latent = true;
  Eigen::VectorXd zeta;
  double sigma_eps2 = 0.01;
  Eigen::MatrixXd sigma_gamma;
  Eigen::VectorXd scalar_low;   // uniform sampler bounds, length P
  Eigen::VectorXd scalar_high;
  Eigen::VectorXd r_grid;
  std::vector<Eigen::VectorXd> mean_curves;  // per functional covariate
  std::vector<Eigen::MatrixXd> modes;        // per covariate, grid x K_true
  std::vector<Eigen::VectorXd> score_variances;
  bool decorrelate_scores = false;  // force the sample score covariance to diag(variances)
  bool emit_micro_scalar = false;   // extra scalar column: (1/R) L2 norm of curve 1
  Eigen::VectorXd times;
  std::uint64_t seed = 1;

  std::vector<int> levels() const;
  ModelConfig model_config() const;  // matching fit configuration, K = K_true
  void validate() const;
};

// N = 60, m = 30, centered first-order basis, P = 1, S = 1, K_true = 2, sigma_eps = 0.1.
SyntheticSpec default_spec(std::uint64_t seed = 1);

// psi_k(r) = sqrt(2) cos(k pi r / R), orthonormal under the (1/R) trapezoid inner product.
Eigen::MatrixXd cosine_modes(const Eigen::VectorXd& r_grid, Eigen::Index K);

struct FunctionalDraw {
  std::vector<std::vector<Eigen::VectorXd>> curves;  // [unit][s]
  ScoreSet scores;                                   // true c_isk
};

struct SyntheticTruth {
  Eigen::VectorXd zeta;
  double sigma_eps2 = 0.0;
  Eigen::MatrixXd sigma_gamma;
  Eigen::MatrixXd gamma;  // N x q
  ScoreSet scores;
};

struct SyntheticData {
  DegradationDataset dataset;
  SyntheticTruth truth;
};

class Rng;
FunctionalDraw generate_functional_covariates(const SyntheticSpec& spec, Rng& rng);
FunctionalDraw generate_functional_covariates(const SyntheticSpec& spec);

SyntheticData generate_dataset(const SyntheticSpec& spec);

// Coefficient-level model evaluated term by term: eta_i for every level.
Eigen::VectorXd true_coefficients(const SyntheticSpec& spec, const Eigen::VectorXd& x,
                                  const Eigen::MatrixXd& scores, const Eigen::VectorXd& gamma);

}  // namespace degrade

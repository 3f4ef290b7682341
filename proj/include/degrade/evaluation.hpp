#pragma once

#include "degrade/datamodel.hpp"
#include "degrade/design.hpp"
#include "degrade/estimator.hpp"
#include "degrade/fpca.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace degrade {

/// Everything needed to predict from a fitted model: the FPCA bases used to
/// score functional covariates, the designs, and the EM result.
struct FittedModel {
  ModelConfig config;
  std::vector<FpcaModel> fpca;  // one per functional covariate; empty without functional terms
  Eigen::Index K = 0;
  ScoreSet scores;              // training scores, S x K per unit
  DegradationDataset data;      // the prepared (centered) training data
  Eigen::VectorXd baselines;    // first raw reading per training unit (0 when uncentered)
  DesignMatrices designs;
  FitResult fit;

  bool functional() const { return config.include_functional || config.include_interaction; }
  std::optional<std::size_t> unit_index(const std::string& unit_id) const;
  double support_length() const { return data.support_length(); }
};

// Centers each unit on its first reading and drops that reading, which is
// identically zero afterwards. A no-op copy for uncentered configurations.
DegradationDataset prepare_responses(const DegradationDataset& ds, const ModelConfig& config);

FittedModel fit_model(const DegradationDataset& ds, const ModelConfig& config, const FitOptions& options = {});

// S x K scores of a unit's curves under the fitted FPCA bases.
Eigen::MatrixXd unit_scores(const FittedModel& model, const UnitRecord& unit);

// eta_i per level. With use_latent the unit must belong to the training data.
Eigen::VectorXd unit_coefficients(const FittedModel& model, const UnitRecord& unit, bool use_latent);

// y(t) = sum_l eta_li phi_l(t) on the model's response scale (centered when
// the configuration centers the baseline).
Eigen::VectorXd predict_unit(const FittedModel& model, const UnitRecord& unit, const Eigen::VectorXd& times,
                             bool use_latent);

struct ResidualMetrics {
  double r2 = 0.0;
  double mse = 0.0;
};
ResidualMetrics residual_metrics(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
};
InformationCriteria information_criteria(double loglik, Eigen::Index p, Eigen::Index n);

struct TemporalSplit {
  DegradationDataset train;
  DegradationDataset test;  // units without held-out readings are omitted
};
TemporalSplit temporal_split(const DegradationDataset& ds, double fraction);

struct CvResult {
  std::vector<std::vector<std::size_t>> folds;  // unit indices per fold
  std::vector<double> fold_errors;              // summed squared prediction errors
  double cv_error = 0.0;
};
// Fold of the unit at shuffled position j is j % k.
std::vector<std::vector<std::size_t>> kfold_assignment(std::size_t n, int k, std::uint64_t seed);
CvResult kfold_cv(const DegradationDataset& ds, const ModelConfig& config, int k, std::uint64_t seed,
                  const FitOptions& options = {});

/// One member of the nested comparison family.
struct ModelVariant {
  std::string name;
  bool scalar = false;
  bool functional = false;
  bool micro_scalar = false;  // scalar summary of the microstructure instead of curves
  bool interaction = false;
  bool latent = false;
  int extra_order = 0;        // added to the base basis order
};

std::vector<ModelVariant> model_family();
ModelVariant variant_by_name(const std::string& name);

/// Scalar columns: `stress_columns` carry the stress covariates, `micro_column`
/// (if any) the scalar microstructure summary used by the micro_scalar variant.
struct VariantColumns {
  std::vector<Eigen::Index> stress_columns;  // empty: every column except micro_column
  std::optional<Eigen::Index> micro_column;
};

ModelConfig variant_config(const ModelVariant& variant, const ModelConfig& base, const VariantColumns& columns,
                           Eigen::Index P);

struct Metrics {
  double r2 = 0.0;
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double mse_train = 0.0;
  double mse_test = 0.0;   // NaN without a held-out split
  double cv_error = 0.0;   // NaN unless folds were requested
  Eigen::Index p = 0;
  Eigen::Index n = 0;
  bool converged = false;
};

// Training-fit metrics plus held-out MSE on `test` (which may be empty).
Metrics evaluate_fit(const FittedModel& model, const DegradationDataset& test);

struct CompareOptions {
  double train_fraction = 0.8;  // 1 fits on everything and leaves mse_test NaN
  int folds = 0;                // 0 skips cross-validation
  std::uint64_t seed = 1;
  VariantColumns columns;
};

struct ComparisonRow {
  std::string model;
  std::optional<Metrics> metrics;
  std::string error;
};

std::vector<ComparisonRow> compare_models(const DegradationDataset& ds, const std::vector<ModelVariant>& variants,
                                          const ModelConfig& base, const FitOptions& options,
                                          const CompareOptions& compare);

void write_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& out);

/// Components of eta_li: population nu, scalar beta^T x, marginal functional,
/// interaction and latent effects.
struct UnitEffects {
  std::string unit_id;
  std::vector<int> levels;
  Eigen::VectorXd population;
  Eigen::VectorXd scalar;
  Eigen::VectorXd marginal;
  Eigen::VectorXd interaction;
  Eigen::VectorXd latent;
  Eigen::VectorXd fitted;  // coefficient map applied to zeta plus mu

  Eigen::VectorXd reconstructed() const { return population + scalar + marginal + interaction + latent; }
};

std::vector<UnitEffects> effect_decomposition(const FittedModel& model);

void write_effects_csv(const std::vector<UnitEffects>& effects, std::ostream& out);

}  // namespace degrade

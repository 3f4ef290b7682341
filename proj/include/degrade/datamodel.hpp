#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace degrade {

/// One tested unit: its degradation path, scalar stress covariates and
/// functional microstructure descriptors sampled on the dataset grid.
struct UnitRecord {
  std::string unit_id;
  Eigen::VectorXd times;                  // strictly increasing
  Eigen::VectorXd responses;              // same length as times
  Eigen::VectorXd scalars;                // length P
  std::vector<Eigen::VectorXd> curves;    // S curves, each sampled on r_grid
};

struct DegradationDataset {
  std::vector<UnitRecord> units;
  Eigen::Index P = 0;
  Eigen::Index S = 0;
  Eigen::VectorXd r_grid;

  std::size_t size() const { return units.size(); }
  Eigen::Index total_observations() const;
  // Support length R of the functional covariates (r_grid spans [0, R]).
  double support_length() const;
  // Throws ValidationError when any invariant is broken.
  void validate() const;
};

enum class BasisKind { polynomial };

struct BasisFamily {
  BasisKind kind = BasisKind::polynomial;
  int order = 1;  // L; the family holds L + 1 functions

  Eigen::Index size() const { return order + 1; }
};

/// Switches for the nested model family plus numerical knobs.
struct ModelConfig {
  BasisFamily basis;
  int K = 0;                       // components per functional covariate; 0 selects by FVE
  double fve = 0.95;
  bool include_scalar = true;
  bool include_functional = true;
  bool include_interaction = true;
  bool include_latent = true;
  bool center_baseline = true;     // subtract the first response and drop the l = 0 level
  bool constrain_sigma_gamma_diagonal = false;
  bool ridge = false;              // 1e-8 * trace / U jitter on the normal equations
  std::vector<Eigen::Index> scalar_columns;  // empty selects every scalar column

  void validate(Eigen::Index P, Eigen::Index S) const;
  // Basis indices l that carry a coefficient level.
  std::vector<int> levels() const;
  std::vector<Eigen::Index> active_scalar_columns(Eigen::Index P) const;
};

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> evaluate_basis(const BasisFamily& basis, Scalar t) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> phi(basis.size());
  Scalar power(1);
  for (Eigen::Index l = 0; l < phi.size(); ++l) {
    phi(l) = power;
    power *= t;
  }
  return phi;
}

DegradationDataset center_baseline(DegradationDataset ds);

DegradationDataset load_dataset(const std::filesystem::path& responses_file,
                                const std::filesystem::path& scalars_file,
                                const std::filesystem::path& curves_file);

// Reads responses.csv, scalars.csv and curves.csv from one directory.
DegradationDataset load_dataset_dir(const std::filesystem::path& dir);

void save_dataset(const DegradationDataset& ds, const std::filesystem::path& responses_file,
                  const std::filesystem::path& scalars_file,
                  const std::filesystem::path& curves_file);

void save_dataset_dir(const DegradationDataset& ds, const std::filesystem::path& dir);

// Round-trippable decimal text for a double.
std::string format_double(double v);

}  // namespace degrade

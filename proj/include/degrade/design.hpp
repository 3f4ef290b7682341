#pragma once

#include "degrade/datamodel.hpp"
#include "degrade/fpca.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace degrade {

/// Column layout of the observed-heterogeneity coefficient vector zeta:
/// [nu | beta_l (P each) | b_ls (K each) | b'_lps (K each)], levels outermost
/// inside each block. Disabled blocks are absent.
class ZetaLayout {
 public:
  struct Segment {
    std::string name;
    Eigen::Index offset = 0;
    Eigen::Index size = 0;
  };

  ZetaLayout() = default;
  ZetaLayout(std::vector<int> levels, Eigen::Index P, Eigen::Index S, Eigen::Index K,
             bool scalar, bool functional, bool interaction);
  static ZetaLayout from_config(const ModelConfig& config, Eigen::Index P, Eigen::Index S, Eigen::Index K);

  Eigen::Index U() const { return U_; }
  Eigen::Index num_levels() const { return static_cast<Eigen::Index>(levels_.size()); }
  const std::vector<int>& levels() const { return levels_; }
  Eigen::Index P() const { return P_; }
  Eigen::Index S() const { return S_; }
  Eigen::Index K() const { return K_; }
  bool has_scalar() const { return scalar_; }
  bool has_functional() const { return functional_; }
  bool has_interaction() const { return interaction_; }
  const std::vector<Segment>& segments() const { return segments_; }

  // Offsets take level positions a = 0..num_levels-1 and zero-based p, s.
  Eigen::Index nu(Eigen::Index a) const { return a; }
  Eigen::Index beta(Eigen::Index a) const;
  Eigen::Index b(Eigen::Index a, Eigen::Index s) const;
  Eigen::Index b_prime(Eigen::Index a, Eigen::Index p, Eigen::Index s) const;

  // Name of the coefficient in column `col`, e.g. "b_1_2[1]".
  std::string column_name(Eigen::Index col) const;

 private:
  std::vector<int> levels_;
  Eigen::Index P_ = 0, S_ = 0, K_ = 0;
  bool scalar_ = false, functional_ = false, interaction_ = false;
  Eigen::Index beta0_ = 0, b0_ = 0, bp0_ = 0, U_ = 0;
  std::vector<Segment> segments_;
};

/// Covariates entering one unit's coefficient level: selected scalars and the
/// S x K score block.
struct UnitCovariates {
  Eigen::VectorXd x;
  Eigen::MatrixXd scores;
};

struct UnitDesign {
  std::string unit_id;
  Eigen::MatrixXd latent;    // Lambda_i, m_i x q (q = 0 without latent effects)
  Eigen::MatrixXd observed;  // Omega_i, m_i x U
  Eigen::VectorXd y;
};

struct DesignMatrices {
  ZetaLayout layout;
  Eigen::Index latent_dim = 0;
  std::vector<UnitDesign> units;
  // Stacked population matrices.
  Eigen::MatrixXd omega;
  Eigen::MatrixXd lambda;  // block diagonal, sum m_i x qN
  Eigen::VectorXd y;
  std::vector<Eigen::Index> row_offsets;

  Eigen::Index num_units() const { return static_cast<Eigen::Index>(units.size()); }
  Eigen::Index num_observations() const { return y.size(); }
};

// Lambda_i(u, a) = phi_{levels[a]}(t_u).
Eigen::MatrixXd build_latent_design(const Eigen::VectorXd& times, const BasisFamily& basis,
                                    const std::vector<int>& levels);

// Omega_i = (Lambda_i | A_2i | A_3i | A_4i) with the blocks of disabled switches omitted.
Eigen::MatrixXd build_observed_design(const Eigen::VectorXd& times, const BasisFamily& basis,
                                      const UnitCovariates& cov, double R, const ZetaLayout& layout);

// q x U map G_i with eta_i = G_i zeta + gamma_i (coefficient level only).
Eigen::MatrixXd coefficient_map(const UnitCovariates& cov, double R, const ZetaLayout& layout);

// Fills the stacked members of `designs` from its per-unit blocks.
void stack_population(DesignMatrices& designs);

UnitCovariates unit_covariates(const UnitRecord& unit, const ScoreSet* scores, std::size_t index,
                               const std::vector<Eigen::Index>& scalar_columns, Eigen::Index K);

// Per-unit and stacked designs for a whole dataset. `scores` may be null when
// the configuration has no functional terms.
DesignMatrices build_designs(const DegradationDataset& ds, const ScoreSet* scores,
                             const ModelConfig& config, Eigen::Index K);

// CSV debug dump: layout.csv plus omega_<unit>.csv and lambda_<unit>.csv.
void dump_design(const DesignMatrices& designs, const std::filesystem::path& dir);

}  // namespace degrade

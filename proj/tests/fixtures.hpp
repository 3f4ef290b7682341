#pragma once
// Instance builders shared by the unit and acceptance tests.

#include "degrade/design.hpp"
#include "degrade/evaluation.hpp"
#include "degrade/simulate.hpp"
#include "oracles.hpp"

#include <random>

namespace fixture {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Random per-unit (Omega_i, Lambda_i, y_i) with U fixed-effect columns and q
// latent columns. Lambda_i is a polynomial basis in random times.
inline degrade::DesignMatrices random_designs(std::mt19937_64& gen, Index N, Index max_m, Index U, Index q) {
  std::uniform_int_distribution<Index> msize(std::max<Index>(q, 2), max_m);
  std::uniform_real_distribution<double> dt(0.1, 0.6);
  degrade::DesignMatrices d;
  d.layout = degrade::ZetaLayout({1}, U - 1, 0, 0, true, false, false);
  d.latent_dim = q;
  for (Index i = 0; i < N; ++i) {
    degrade::UnitDesign u;
    u.unit_id = "r" + std::to_string(i);
    const Index m = msize(gen);
    u.latent.resize(m, q);
    double t = 0.0;
    for (Index j = 0; j < m; ++j) {
      t += dt(gen);
      for (Index a = 0; a < q; ++a) u.latent(j, a) = std::pow(t, static_cast<double>(a));
    }
    u.observed = oracle::random_matrix(gen, m, U);
    u.y = oracle::random_matrix(gen, m, 1);
    d.units.push_back(std::move(u));
  }
  degrade::stack_population(d);
  return d;
}

inline degrade::Parameters random_params(std::mt19937_64& gen, Index U, Index q) {
  std::uniform_real_distribution<double> var(0.2, 2.0);
  degrade::Parameters p;
  p.zeta = oracle::random_matrix(gen, U, 1);
  p.sigma_eps2 = var(gen);
  p.sigma_gamma = oracle::random_spd(gen, q);
  return p;
}

// Synthetic data fitted with the true scores on the prepared (baseline-dropped) responses.
struct TrueScoreInstance {
  degrade::SyntheticData data;
  degrade::ModelConfig config;
  degrade::DesignMatrices designs;
};

inline TrueScoreInstance true_score_instance(const degrade::SyntheticSpec& spec) {
  TrueScoreInstance out;
  out.data = degrade::generate_dataset(spec);
  out.config = spec.model_config();
  const auto prepared = degrade::prepare_responses(out.data.dataset, out.config);
  const bool functional = spec.include_functional || spec.include_interaction;
  out.designs = degrade::build_designs(prepared, functional ? &out.data.truth.scores : nullptr, out.config,
                                       functional ? spec.K_true : 0);
  return out;
}

}  // namespace fixture

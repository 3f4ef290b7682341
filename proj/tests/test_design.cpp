#include "degrade/design.hpp"
#include "degrade/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace degrade;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

UnitCovariates covariates(VectorXd x, MatrixXd scores) { return UnitCovariates{std::move(x), std::move(scores)}; }

DegradationDataset random_dataset(std::mt19937_64& gen, const std::vector<int>& m, Index P, Index S, Index G) {
  std::uniform_real_distribution<double> u(0.05, 0.5);
  DegradationDataset ds;
  ds.P = P;
  ds.S = S;
  ds.r_grid = VectorXd::LinSpaced(G, 0.0, 1.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    UnitRecord rec;
    rec.unit_id = "u" + std::to_string(i);
    rec.times.resize(m[i]);
    double t = 0.0;
    for (int j = 0; j < m[i]; ++j) rec.times(j) = (t += u(gen));
    rec.responses = oracle::random_matrix(gen, m[i], 1);
    rec.scalars = oracle::random_matrix(gen, P, 1);
    for (Index s = 0; s < S; ++s) rec.curves.push_back(oracle::random_matrix(gen, G, 1));
    ds.units.push_back(rec);
  }
  return ds;
}

ScoreSet random_scores(std::mt19937_64& gen, std::size_t N, Index S, Index K) {
  ScoreSet sc;
  sc.S = S;
  sc.K = K;
  for (std::size_t i = 0; i < N; ++i) sc.per_unit.push_back(oracle::random_matrix(gen, S, K));
  return sc;
}

}  // namespace

TEST_CASE("observed design element example") {
  const ZetaLayout layout({0, 1}, 1, 1, 1, true, true, true);
  REQUIRE(layout.U() == 8);
  const MatrixXd omega = build_observed_design((VectorXd(2) << 1, 2).finished(), BasisFamily{BasisKind::polynomial, 1},
                                               covariates(VectorXd::Constant(1, 2.0), MatrixXd::Constant(1, 1, 0.5)),
                                               10.0, layout);
  MatrixXd expected(2, 8);
  expected << 1, 1, 2, 2, 5, 5, 10, 10, 1, 2, 2, 4, 5, 10, 10, 20;
  CHECK(omega == expected);
}

TEST_CASE("disabled blocks are omitted and zero scalars zero their blocks") {
  const BasisFamily basis{BasisKind::polynomial, 2};
  const std::vector<int> levels{0, 1, 2};
  const Index P = 2, S = 2, K = 3;
  const ZetaLayout no_inter(levels, P, S, K, true, true, false);
  CHECK(no_inter.U() == 3 * (1 + P + S * K));
  CHECK(!no_inter.has_interaction());
  const ZetaLayout full(levels, P, S, K, true, true, true);
  CHECK(full.U() == 3 * (1 + P + S * K + P * S * K));

  std::mt19937_64 gen(3);
  const VectorXd t = (VectorXd(4) << 0.5, 1.0, 1.5, 3.0).finished();
  const MatrixXd omega =
      build_observed_design(t, basis, covariates(VectorXd::Zero(P), oracle::random_matrix(gen, S, K)), 2.0, full);
  CHECK(omega.middleCols(full.beta(0), 3 * P).cwiseAbs().maxCoeff() == 0.0);
  CHECK(omega.middleCols(full.b_prime(0, 0, 0), 3 * P * S * K).cwiseAbs().maxCoeff() == 0.0);
  CHECK(omega.middleCols(full.b(0, 0), 3 * S * K).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("first columns of the observed design equal the latent design") {
  const BasisFamily basis{BasisKind::polynomial, 3};
  for (const auto& levels : {std::vector<int>{0, 1, 2, 3}, std::vector<int>{1, 2, 3}}) {
    const ZetaLayout layout(levels, 1, 1, 2, true, true, true);
    const VectorXd t = (VectorXd(5) << 0.1, 0.4, 0.9, 1.3, 2.0).finished();
    const MatrixXd lambda = build_latent_design(t, basis, levels);
    const MatrixXd omega = build_observed_design(
        t, basis, covariates(VectorXd::Constant(1, -0.7), (MatrixXd(1, 2) << 0.3, -1.1).finished()), 4.0, layout);
    CHECK(omega.leftCols(lambda.cols()) == lambda);
    for (Index u = 0; u < t.size(); ++u)
      for (std::size_t a = 0; a < levels.size(); ++a)
        CHECK(lambda(u, static_cast<Index>(a)) == doctest::Approx(std::pow(t(u), levels[a])).epsilon(1e-15));
  }
}

TEST_CASE("Omega zeta equals the term-by-term coefficient expansion") {
  std::mt19937_64 gen(5);
  const BasisFamily basis{BasisKind::polynomial, 2};
  const std::vector<int> levels{1, 2};
  const Index P = 2, S = 2, K = 3;
  const double R = 3.5;
  const ZetaLayout layout(levels, P, S, K, true, true, true);
  for (int rep = 0; rep < 10; ++rep) {
    const VectorXd x = oracle::random_matrix(gen, P, 1);
    const MatrixXd c = oracle::random_matrix(gen, S, K);
    const VectorXd zeta = oracle::random_matrix(gen, layout.U(), 1);
    const VectorXd t = (VectorXd(3) << 0.2, 0.7, 1.9).finished();
    const VectorXd fitted = build_observed_design(t, basis, covariates(x, c), R, layout) * zeta;

    // eta_l = nu_l + beta_l x + R sum b_lsk c_sk + R sum x_p b'_lpsk c_sk, read by name.
    VectorXd eta = VectorXd::Zero(2);
    Index col = 0;
    for (Index a = 0; a < 2; ++a) eta(a) += zeta(col++);
    for (Index a = 0; a < 2; ++a)
      for (Index p = 0; p < P; ++p) eta(a) += zeta(col++) * x(p);
    for (Index a = 0; a < 2; ++a)
      for (Index s = 0; s < S; ++s)
        for (Index k = 0; k < K; ++k) eta(a) += R * zeta(col++) * c(s, k);
    for (Index a = 0; a < 2; ++a)
      for (Index p = 0; p < P; ++p)
        for (Index s = 0; s < S; ++s)
          for (Index k = 0; k < K; ++k) eta(a) += R * x(p) * zeta(col++) * c(s, k);
    REQUIRE(col == layout.U());
    for (Index u = 0; u < 3; ++u) {
      const double direct = eta(0) * t(u) + eta(1) * t(u) * t(u);
      CHECK(fitted(u) == doctest::Approx(direct).epsilon(1e-12));
    }
    // The coefficient map gives the same eta.
    const MatrixXd G = coefficient_map(covariates(x, c), R, layout);
    CHECK((G * zeta - eta).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + eta.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("layout names and offsets") {
  const ZetaLayout layout({1}, 2, 1, 2, true, true, true);
  CHECK(layout.U() == 1 + 2 + 2 + 4);
  CHECK(layout.column_name(0) == "nu[1]");
  CHECK(layout.column_name(layout.beta(0) + 1) == "beta_1[2]");
  CHECK(layout.column_name(layout.b(0, 0)) == "b_1_1[1]");
  CHECK(layout.column_name(layout.b_prime(0, 1, 0) + 1) == "bp_1_2_1[2]");
  CHECK_THROWS_AS(layout.column_name(layout.U()), ValidationError);
}

TEST_CASE("dimension mismatches are validation errors") {
  const ZetaLayout layout({0, 1}, 2, 1, 2, true, true, true);
  const VectorXd t = VectorXd::LinSpaced(3, 0.0, 1.0);
  const BasisFamily basis;
  CHECK_THROWS_AS(build_observed_design(t, basis, covariates(VectorXd::Zero(1), MatrixXd::Zero(1, 2)), 1.0, layout),
                  ValidationError);
  CHECK_THROWS_AS(build_observed_design(t, basis, covariates(VectorXd::Zero(2), MatrixXd::Zero(2, 2)), 1.0, layout),
                  ValidationError);
  CHECK_THROWS_AS(build_observed_design(t, basis, covariates(VectorXd::Zero(2), MatrixXd::Zero(1, 1)), 1.0, layout),
                  ValidationError);
}

TEST_CASE("stacking shapes and block structure") {
  std::mt19937_64 gen(7);
  const auto ds = random_dataset(gen, {2, 3}, 1, 1, 9);
  const auto scores = random_scores(gen, 2, 1, 2);
  ModelConfig cfg;
  cfg.center_baseline = false;
  const DesignMatrices d = build_designs(ds, &scores, cfg, 2);
  CHECK(d.omega.rows() == 5);
  CHECK(d.lambda.rows() == 5);
  CHECK(d.lambda.cols() == 4);
  CHECK(d.lambda.block(0, 2, 2, 2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.lambda.block(2, 0, 3, 2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.lambda.block(0, 0, 2, 2) == d.units[0].latent);
  CHECK(d.lambda.block(2, 2, 3, 2) == d.units[1].latent);
  CHECK(d.y.head(2) == ds.units[0].responses);
  CHECK(d.y.tail(3) == ds.units[1].responses);

  DegradationDataset one = ds;
  one.units.resize(1);
  const DesignMatrices d1 = build_designs(one, &scores, cfg, 2);
  CHECK(d1.omega == d1.units[0].observed);
  CHECK(d1.lambda == d1.units[0].latent);
  CHECK(d1.y == d1.units[0].y);

  DesignMatrices bad = d;
  bad.units[1].observed = MatrixXd::Zero(3, bad.layout.U() + 1);
  CHECK_THROWS_AS(stack_population(bad), ValidationError);
}

TEST_CASE("permuting units permutes row blocks consistently") {
  std::mt19937_64 gen(9);
  const auto ds = random_dataset(gen, {3, 2, 4}, 2, 1, 7);
  const auto scores = random_scores(gen, 3, 1, 2);
  ModelConfig cfg;
  const DesignMatrices d = build_designs(ds, &scores, cfg, 2);

  const std::vector<std::size_t> perm{2, 0, 1};
  DegradationDataset pds = ds;
  ScoreSet pscores = scores;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    pds.units[i] = ds.units[perm[i]];
    pscores.per_unit[i] = scores.per_unit[perm[i]];
  }
  const DesignMatrices pd = build_designs(pds, &pscores, cfg, 2);
  const Index q = d.latent_dim;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto j = perm[i];
    const Index m = d.units[j].y.size();
    const Index r_new = pd.row_offsets[i], r_old = d.row_offsets[j];
    CHECK(pd.omega.middleRows(r_new, m) == d.omega.middleRows(r_old, m));
    CHECK(pd.y.segment(r_new, m) == d.y.segment(r_old, m));
    CHECK(pd.lambda.block(r_new, static_cast<Index>(i) * q, m, q) ==
          d.lambda.block(r_old, static_cast<Index>(j) * q, m, q));
  }
}

TEST_CASE("build_designs respects scalar column selection and missing scores") {
  std::mt19937_64 gen(11);
  const auto ds = random_dataset(gen, {3, 3}, 3, 1, 5);
  const auto scores = random_scores(gen, 2, 1, 2);
  ModelConfig cfg;
  cfg.scalar_columns = {2};
  const DesignMatrices d = build_designs(ds, &scores, cfg, 2);
  CHECK(d.layout.P() == 1);
  CHECK(d.units[1].observed(0, d.layout.beta(0)) == ds.units[1].scalars(2) * ds.units[1].times(0));
  CHECK_THROWS_AS(build_designs(ds, nullptr, cfg, 2), ValidationError);
  ModelConfig scalar_only;
  scalar_only.include_functional = scalar_only.include_interaction = false;
  CHECK(build_designs(ds, nullptr, scalar_only, 0).layout.U() == 1 + 3);
}

TEST_CASE("dump_design writes layout and per-unit matrices") {
  std::mt19937_64 gen(13);
  const auto ds = random_dataset(gen, {2, 2}, 1, 1, 5);
  const auto scores = random_scores(gen, 2, 1, 1);
  const DesignMatrices d = build_designs(ds, &scores, ModelConfig{}, 1);
  const auto dir = std::filesystem::temp_directory_path() / "degrade_dump_design";
  std::filesystem::remove_all(dir);
  dump_design(d, dir);
  CHECK(std::filesystem::exists(dir / "layout.csv"));
  CHECK(std::filesystem::exists(dir / "omega_u0.csv"));
  CHECK(std::filesystem::exists(dir / "lambda_u1.csv"));
}

#include "degrade/errors.hpp"
#include "degrade/evaluation.hpp"
#include "degrade/simulate.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace degrade;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SyntheticSpec small_spec(std::uint64_t seed, Index N = 30) {
  SyntheticSpec spec = default_spec(seed);
  spec.N = N;
  spec.m = 12;
  spec.times = VectorXd::LinSpaced(12, 0.0, 1.0);
  return spec;
}

FitOptions quick() {
  FitOptions o;
  o.max_iter = 300;
  o.tol = 1e-9;
  return o;
}

}  // namespace

TEST_CASE("residual_metrics examples") {
  const VectorXd y = (VectorXd(4) << 1.0, 3.0, 2.0, 7.0).finished();
  const auto exact = residual_metrics(y, y);
  CHECK(exact.r2 == 1.0);
  CHECK(exact.mse == 0.0);
  CHECK(residual_metrics(y, VectorXd::Constant(4, y.mean())).r2 == doctest::Approx(0.0).scale(1.0));
  const auto two = residual_metrics((VectorXd(2) << 0, 2).finished(), (VectorXd(2) << 1, 1).finished());
  CHECK(two.mse == 1.0);
  CHECK(two.r2 == 0.0);
  CHECK_THROWS_AS(residual_metrics(VectorXd::Ones(3), VectorXd::Zero(3)), ValidationError);
  CHECK_THROWS_AS(residual_metrics(VectorXd::Ones(1), VectorXd::Zero(1)), ValidationError);
  CHECK_THROWS_AS(residual_metrics(y, VectorXd::Zero(3)), ValidationError);
}

TEST_CASE("information criteria examples") {
  const auto zero = information_criteria(-12.5, 0, 40);
  CHECK(zero.aic == 25.0);
  CHECK(zero.bic == 25.0);
  const auto ic = information_criteria(-100.0, 5, 12);
  CHECK(ic.aic == doctest::Approx(210.0).epsilon(1e-15));
  CHECK(ic.bic == doctest::Approx(212.4245).epsilon(1e-6));
  // ln 7 < 2 < ln 8: AIC and BIC penalties straddle N = e^2.
  CHECK(information_criteria(-1.0, 3, 7).bic < information_criteria(-1.0, 3, 7).aic);
  CHECK(information_criteria(-1.0, 3, 8).bic > information_criteria(-1.0, 3, 8).aic);
  // Constant loglik shifts keep the ordering.
  const auto a = information_criteria(-50.0, 4, 30), b = information_criteria(-47.0, 7, 30);
  const auto a2 = information_criteria(-50.0 + 123.4, 4, 30), b2 = information_criteria(-47.0 + 123.4, 7, 30);
  CHECK((a.aic < b.aic) == (a2.aic < b2.aic));
  CHECK((a.bic < b.bic) == (a2.bic < b2.bic));
  CHECK_THROWS_AS(information_criteria(0.0, -1, 5), ValidationError);
}

TEST_CASE("temporal split sizes and coverage") {
  auto make = [](Index m) {
    DegradationDataset ds;
    UnitRecord u;
    u.unit_id = "a";
    u.times = VectorXd::LinSpaced(m, 1.0, static_cast<double>(m));
    u.responses = u.times * 2.0;
    ds.units.push_back(u);
    return ds;
  };
  const auto s20 = temporal_split(make(20), 0.8);
  CHECK(s20.train.units[0].times.size() == 16);
  CHECK(s20.test.units[0].times.size() == 4);
  CHECK(s20.train.units[0].times(15) < s20.test.units[0].times(0));
  VectorXd joined(20);
  joined << s20.train.units[0].responses, s20.test.units[0].responses;
  CHECK(joined == make(20).units[0].responses);

  const auto s5 = temporal_split(make(5), 0.8);
  CHECK(s5.train.units[0].times.size() == 4);
  CHECK(s5.test.units[0].times.size() == 1);
  const auto s3 = temporal_split(make(3), 0.99);
  CHECK(s3.train.units[0].times.size() == 2);
  CHECK(s3.test.units[0].times.size() == 1);
  CHECK_THROWS_AS(temporal_split(make(1), 0.5), ValidationError);
  CHECK_THROWS_AS(temporal_split(make(5), 1.0), ValidationError);
}

TEST_CASE("k-fold assignment is a seeded partition") {
  const auto a = kfold_assignment(23, 5, 11), b = kfold_assignment(23, 5, 11);
  CHECK(a == b);
  std::vector<int> seen(23, 0);
  for (const auto& f : a) {
    CHECK(f.size() >= 4);
    for (auto i : f) ++seen[i];
  }
  for (int s : seen) CHECK(s == 1);
  CHECK(kfold_assignment(23, 5, 12) != a);
  const auto loo = kfold_assignment(6, 6, 3);
  for (const auto& f : loo) CHECK(f.size() == 1);
  CHECK_THROWS_AS(kfold_assignment(4, 5, 1), ValidationError);
  CHECK_THROWS_AS(kfold_assignment(4, 1, 1), ValidationError);
}

TEST_CASE("cross-validation on identical units gives equal fold errors") {
  DegradationDataset ds;
  ds.P = 1;
  ds.S = 1;
  ds.r_grid = VectorXd::LinSpaced(5, 0.0, 1.0);
  for (int i = 0; i < 6; ++i) {
    UnitRecord u;
    u.unit_id = "u" + std::to_string(i);
    u.times = VectorXd::LinSpaced(6, 0.0, 1.0);
    u.responses = (VectorXd(6) << 0.0, 0.3, 0.35, 0.7, 0.72, 1.1).finished();
    u.scalars = VectorXd::Ones(1);
    u.curves.push_back(VectorXd::LinSpaced(5, 1.0, 2.0));
    ds.units.push_back(u);
  }
  ModelConfig cfg;
  cfg.include_scalar = cfg.include_functional = cfg.include_interaction = false;
  FitOptions o;
  o.max_iter = 50;
  const auto cv = kfold_cv(ds, cfg, 3, 4, o);
  REQUIRE(cv.fold_errors.size() == 3);
  for (double e : cv.fold_errors) CHECK(std::abs(e - cv.fold_errors[0]) <= 1e-10);
  const auto again = kfold_cv(ds, cfg, 3, 4, o);
  CHECK(again.cv_error == cv.cv_error);
  CHECK(again.folds == cv.folds);
}

TEST_CASE("model family and variant configurations") {
  const auto family = model_family();
  REQUIRE(family.size() == 7);
  CHECK(family[6].latent);
  CHECK(family[4].extra_order == 1);
  CHECK_THROWS_AS(variant_by_name("Model8"), ValidationError);
  ModelConfig base;
  VariantColumns cols;
  cols.micro_column = 1;
  const ModelConfig m6 = variant_config(variant_by_name("Model6"), base, cols, 2);
  CHECK(m6.scalar_columns == std::vector<Index>{0, 1});
  CHECK(!m6.include_functional);
  const ModelConfig m1 = variant_config(variant_by_name("Model1"), base, cols, 2);
  CHECK(m1.scalar_columns == std::vector<Index>{0});
  CHECK(variant_config(variant_by_name("Model5"), base, cols, 2).basis.order == base.basis.order + 1);
  CHECK_THROWS_AS(variant_config(variant_by_name("Model6"), base, VariantColumns{}, 2), ValidationError);
}

TEST_CASE("prediction with and without the latent posterior") {
  const auto data = generate_dataset(small_spec(2));
  const FittedModel model = fit_model(data.dataset, small_spec(2).model_config(), quick());
  const auto& unit = data.dataset.units[3];
  const VectorXd t = (VectorXd(3) << 0.1, 0.5, 0.9).finished();
  const VectorXd with = predict_unit(model, unit, t, true), without = predict_unit(model, unit, t, false);
  const auto i = *model.unit_index(unit.unit_id);
  const MatrixXd lambda = build_latent_design(t, model.config.basis, model.config.levels());
  CHECK((with - without - lambda * model.fit.posterior.mu[i]).cwiseAbs().maxCoeff() <= 1e-12);

  UnitRecord stranger = unit;
  stranger.unit_id = "stranger";
  CHECK_THROWS_WITH_AS(predict_unit(model, stranger, t, true), doctest::Contains("no latent posterior"),
                       ValidationError);
  CHECK(predict_unit(model, stranger, t, false) == without);

  // Fitted values on the training design agree with predict_unit.
  const auto& d = model.designs.units[i];
  const VectorXd fitted = d.observed * model.fit.params.zeta + d.latent * model.fit.posterior.mu[i];
  CHECK((predict_unit(model, model.data.units[i], model.data.units[i].times, true) - fitted).cwiseAbs().maxCoeff() <=
        1e-12);
}

TEST_CASE("nested dominance: Model3 R2 is at least Model1 and Model2") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SyntheticSpec spec = small_spec(seed);
    spec.include_interaction = false;
    spec.zeta = (VectorXd(4) << 1.0, 0.8, 0.6, -0.4).finished();
    const auto data = generate_dataset(spec);
    CompareOptions co;
    co.train_fraction = 1.0;
    const auto rows = compare_models(data.dataset,
                                     {variant_by_name("Model3"), variant_by_name("Model1"), variant_by_name("Model2")},
                                     spec.model_config(), quick(), co);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].model == "Model1");
    for (const auto& r : rows) REQUIRE(r.metrics);
    CHECK(rows[2].metrics->r2 >= rows[0].metrics->r2);
    CHECK(rows[2].metrics->r2 >= rows[1].metrics->r2);
    CHECK(std::isnan(rows[0].metrics->mse_test));
  }
}

TEST_CASE("compare_models reports per-variant errors and single rows") {
  const auto data = generate_dataset(small_spec(5));
  const auto rows = compare_models(data.dataset, {variant_by_name("Model6"), variant_by_name("Model4")},
                                   small_spec(5).model_config(), quick(), CompareOptions{});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].model == "Model4");
  CHECK(rows[0].metrics);
  CHECK(std::isfinite(rows[0].metrics->mse_test));
  CHECK(!rows[1].metrics);
  CHECK(rows[1].error.find("microstructure") != std::string::npos);
  std::ostringstream csv;
  write_comparison_csv(rows, csv);
  CHECK(csv.str().rfind("model,r2,loglik,aic,bic,mse_train,mse_test", 0) == 0);

  const auto one = compare_models(data.dataset, {variant_by_name("Model7")}, small_spec(5).model_config(), quick(),
                                  CompareOptions{});
  CHECK(one.size() == 1);
  CHECK(one[0].metrics->p == 6 + 1 + 1);
}

TEST_CASE("effect decomposition hand example") {
  FittedModel model;
  model.config.include_scalar = model.config.include_interaction = model.config.include_latent = false;
  model.config.K = 2;
  model.K = 2;
  model.data.S = 1;
  model.data.r_grid = VectorXd::LinSpaced(11, 0.0, 10.0);
  UnitRecord u;
  u.unit_id = "a";
  model.data.units.push_back(u);
  model.scores.S = 1;
  model.scores.K = 2;
  model.scores.per_unit.push_back((MatrixXd(1, 2) << 1.0, 0.5).finished());
  model.designs.layout = ZetaLayout({1}, 0, 1, 2, false, true, false);
  model.fit.params.zeta = (VectorXd(3) << 0.25, 0.1, -0.2).finished();
  const auto effects = effect_decomposition(model);
  REQUIRE(effects.size() == 1);
  CHECK(std::abs(effects[0].marginal(0)) <= 1e-15);
  CHECK(effects[0].population(0) == 0.25);
  CHECK(effects[0].fitted(0) == doctest::Approx(0.25).epsilon(1e-15));

  model.fit.params.zeta.tail(2).setZero();
  CHECK(effect_decomposition(model)[0].marginal(0) == 0.0);
}

TEST_CASE("effect decomposition identity and linearity in x") {
  const auto data = generate_dataset(small_spec(6));
  FittedModel model = fit_model(data.dataset, small_spec(6).model_config(), quick());
  const auto effects = effect_decomposition(model);
  REQUIRE(effects.size() == data.dataset.size());
  for (std::size_t i = 0; i < effects.size(); ++i) {
    const auto& e = effects[i];
    CHECK((e.reconstructed() - e.fitted).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((e.fitted - unit_coefficients(model, model.data.units[i], true)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((e.latent - model.fit.posterior.mu[i]).cwiseAbs().maxCoeff() == 0.0);
  }
  for (auto& u : model.data.units) u.scalars *= 2.0;
  const auto doubled = effect_decomposition(model);
  for (std::size_t i = 0; i < effects.size(); ++i) {
    CHECK(doubled[i].interaction(0) == 2.0 * effects[i].interaction(0));
    CHECK(doubled[i].marginal(0) == effects[i].marginal(0));
  }
  std::ostringstream csv;
  write_effects_csv(effects, csv);
  CHECK(csv.str().rfind("unit_id,level,marginal_effect,interaction_effect,latent_effect", 0) == 0);
}

TEST_CASE("fit_model selects K by FVE and validates an explicit K") {
  const auto data = generate_dataset(small_spec(7));
  ModelConfig cfg = small_spec(7).model_config();
  cfg.K = 0;
  cfg.fve = 0.5;
  const FittedModel m = fit_model(data.dataset, cfg, quick());
  CHECK(m.K == select_k_by_fve(m.fpca[0], 0.5));
  CHECK(m.designs.units[0].y.size() == data.dataset.units[0].responses.size() - 1);
  CHECK(m.baselines(0) == data.dataset.units[0].responses(0));
  cfg.K = 500;
  CHECK_THROWS_AS(fit_model(data.dataset, cfg, quick()), ValidationError);
}

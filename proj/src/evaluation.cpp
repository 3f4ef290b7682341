#include "degrade/evaluation.hpp"

#include "degrade/errors.hpp"
#include "degrade/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace degrade {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

UnitCovariates covariates_for(const FittedModel& model, const UnitRecord& unit) {
  const auto columns = model.config.active_scalar_columns(model.data.P);
  UnitCovariates cov;
  cov.x.resize(static_cast<Index>(columns.size()));
  for (std::size_t p = 0; p < columns.size(); ++p) {
    if (columns[p] >= unit.scalars.size()) throw ValidationError("missing covariates for unit " + unit.unit_id);
    cov.x(static_cast<Index>(p)) = unit.scalars(columns[p]);
  }
  if (model.functional()) cov.scores = unit_scores(model, unit);
  return cov;
}

DegradationDataset subset(const DegradationDataset& ds, const std::vector<std::size_t>& idx) {
  DegradationDataset out;
  out.P = ds.P;
  out.S = ds.S;
  out.r_grid = ds.r_grid;
  for (std::size_t i : idx) out.units.push_back(ds.units[i]);
  return out;
}

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); }

}  // namespace

std::optional<std::size_t> FittedModel::unit_index(const std::string& unit_id) const {
  for (std::size_t i = 0; i < data.units.size(); ++i)
    if (data.units[i].unit_id == unit_id) return i;
  return std::nullopt;
}

DegradationDataset prepare_responses(const DegradationDataset& ds, const ModelConfig& config) {
  if (!config.center_baseline) return ds;
  DegradationDataset out = center_baseline(ds);
  for (auto& u : out.units) {
    const Index m = u.times.size();
    if (m < 2) throw ValidationError("unit " + u.unit_id + " has no readings after its baseline");
    u.times = VectorXd(u.times.tail(m - 1));
    u.responses = VectorXd(u.responses.tail(m - 1));
  }
  return out;
}

FittedModel fit_model(const DegradationDataset& ds, const ModelConfig& config, const FitOptions& options) {
  ds.validate();
  config.validate(ds.P, ds.S);
  FittedModel model;
  model.config = config;
  model.data = prepare_responses(ds, config);
  model.baselines = VectorXd::Zero(static_cast<Index>(ds.size()));
  if (config.center_baseline)
    for (std::size_t i = 0; i < ds.size(); ++i) model.baselines(static_cast<Index>(i)) = ds.units[i].responses(0);

  if (model.functional()) {
    const auto N = static_cast<Index>(ds.size());
    const Index G = ds.r_grid.size();
    std::vector<MatrixXd> all_scores;
    Index K = 0;
    for (Index s = 0; s < ds.S; ++s) {
      MatrixXd curves(N, G);
      for (Index i = 0; i < N; ++i) curves.row(i) = ds.units[static_cast<std::size_t>(i)].curves[s].transpose();
      model.fpca.push_back(fit_fpca(curves, ds.r_grid, config.fve));
      all_scores.push_back(project_scores(model.fpca.back(), curves));
      K = std::max(K, model.fpca.back().K);
    }
    if (config.K > 0) K = config.K;
    for (const auto& f : model.fpca)
      if (K > f.full_rank())
        throw ValidationError("K = " + std::to_string(K) + " exceeds the " + std::to_string(f.full_rank()) +
                              " nonzero FPCA components");
    for (auto& f : model.fpca) f.K = K;
    model.K = K;
    model.scores.S = ds.S;
    model.scores.K = K;
    for (Index i = 0; i < N; ++i) {
      MatrixXd block(ds.S, K);
      for (Index s = 0; s < ds.S; ++s) block.row(s) = all_scores[static_cast<std::size_t>(s)].row(i).head(K);
      model.scores.per_unit.push_back(std::move(block));
    }
  }

  model.designs = build_designs(model.data, model.functional() ? &model.scores : nullptr, config, model.K);
  FitOptions opts = options;
  opts.constrain_sigma_gamma_diagonal = opts.constrain_sigma_gamma_diagonal || config.constrain_sigma_gamma_diagonal;
  opts.ridge = opts.ridge || config.ridge;
  model.fit = fit_em(model.designs, opts);
  return model;
}

MatrixXd unit_scores(const FittedModel& model, const UnitRecord& unit) {
  const auto S = static_cast<Index>(model.fpca.size());
  if (static_cast<Index>(unit.curves.size()) < S) throw ValidationError("missing scores for unit " + unit.unit_id);
  MatrixXd out(S, model.K);
  for (Index s = 0; s < S; ++s) {
    const auto& f = model.fpca[static_cast<std::size_t>(s)];
    if (unit.curves[s].size() != f.r_grid.size()) throw ValidationError("ragged functional grid");
    out.row(s) = project_scores(f, unit.curves[s].transpose()).leftCols(model.K);
  }
  return out;
}

VectorXd unit_coefficients(const FittedModel& model, const UnitRecord& unit, bool use_latent) {
  const UnitCovariates cov = covariates_for(model, unit);
  VectorXd eta = coefficient_map(cov, model.support_length(), model.designs.layout) * model.fit.params.zeta;
  if (use_latent && model.designs.latent_dim > 0) {
    const auto i = model.unit_index(unit.unit_id);
    if (!i) throw ValidationError("no latent posterior for unit " + unit.unit_id);
    eta += model.fit.posterior.mu[*i];
  }
  return eta;
}

VectorXd predict_unit(const FittedModel& model, const UnitRecord& unit, const VectorXd& times, bool use_latent) {
  const VectorXd eta = unit_coefficients(model, unit, use_latent);
  const auto levels = model.config.levels();
  VectorXd y(times.size());
  for (Index j = 0; j < times.size(); ++j) {
    const VectorXd phi = evaluate_basis(model.config.basis, times(j));
    double v = 0.0;
    for (std::size_t a = 0; a < levels.size(); ++a) v += eta(static_cast<Index>(a)) * phi(levels[a]);
    y(j) = v;
  }
  return y;
}

ResidualMetrics residual_metrics(const VectorXd& y, const VectorXd& yhat) {
  if (y.size() != yhat.size()) throw ValidationError("residual_metrics: length mismatch");
  if (y.size() < 2) throw ValidationError("residual_metrics: need at least two points");
  const double sse = (y - yhat).squaredNorm();
  const double sst = (y.array() - y.mean()).square().sum();
  if (sst == 0.0) throw ValidationError("residual_metrics: zero total sum of squares");
  return {1.0 - sse / sst, sse / static_cast<double>(y.size())};
}

InformationCriteria information_criteria(double loglik, Index p, Index n) {
  if (p < 0 || n < 1) throw ValidationError("information_criteria: need p >= 0 and N >= 1");
  const auto pk = static_cast<double>(p);
  return {-2.0 * loglik + 2.0 * pk, -2.0 * loglik + pk * std::log(static_cast<double>(n))};
}

TemporalSplit temporal_split(const DegradationDataset& ds, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("split fraction must lie in (0, 1)");
  TemporalSplit out;
  for (auto* part : {&out.train, &out.test}) {
    part->P = ds.P;
    part->S = ds.S;
    part->r_grid = ds.r_grid;
  }
  for (const auto& u : ds.units) {
    const Index m = u.times.size();
    const auto n_train = static_cast<Index>(std::floor(fraction * static_cast<double>(m) + 1e-9));
    if (n_train < 1) throw ValidationError("unit " + u.unit_id + " has an empty training split");
    UnitRecord tr = u;
    tr.times = VectorXd(u.times.head(n_train));
    tr.responses = VectorXd(u.responses.head(n_train));
    out.train.units.push_back(std::move(tr));
    if (n_train < m) {
      UnitRecord te = u;
      te.times = VectorXd(u.times.tail(m - n_train));
      te.responses = VectorXd(u.responses.tail(m - n_train));
      out.test.units.push_back(std::move(te));
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> kfold_assignment(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > n) throw ValidationError("folds must satisfy 2 <= k <= N");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  for (std::size_t j = 0; j < n; ++j) folds[j % static_cast<std::size_t>(k)].push_back(order[j]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

CvResult kfold_cv(const DegradationDataset& ds, const ModelConfig& config, int k, std::uint64_t seed,
                  const FitOptions& options) {
  CvResult out;
  out.folds = kfold_assignment(ds.size(), k, seed);
  for (const auto& fold : out.folds) {
    if (fold.empty()) throw ValidationError("cross-validation fold with zero units");
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (!std::binary_search(fold.begin(), fold.end(), i)) train_idx.push_back(i);
    const FittedModel model = fit_model(subset(ds, train_idx), config, options);
    const DegradationDataset held = prepare_responses(subset(ds, fold), config);
    double err = 0.0;
    for (const auto& u : held.units) err += (u.responses - predict_unit(model, u, u.times, false)).squaredNorm();
    out.fold_errors.push_back(err);
  }
  out.cv_error = std::accumulate(out.fold_errors.begin(), out.fold_errors.end(), 0.0);
  return out;
}

std::vector<ModelVariant> model_family() {
  std::vector<ModelVariant> v(7);
  v[0] = {"Model1", true, false, false, false, false, 0};
  v[1] = {"Model2", false, true, false, false, false, 0};
  v[2] = {"Model3", true, true, false, false, false, 0};
  v[3] = {"Model4", true, true, false, true, false, 0};
  v[4] = {"Model5", true, true, false, true, false, 1};
  v[5] = {"Model6", true, false, true, false, false, 0};
  v[6] = {"Model7", true, true, false, true, true, 0};
  return v;
}

ModelVariant variant_by_name(const std::string& name) {
  for (const auto& v : model_family())
    if (v.name == name) return v;
  throw ValidationError("unknown variant '" + name + "' (expected Model1..Model7)");
}

ModelConfig variant_config(const ModelVariant& variant, const ModelConfig& base, const VariantColumns& columns,
                           Index P) {
  std::vector<Index> stress = columns.stress_columns;
  if (stress.empty())
    for (Index c : base.active_scalar_columns(P))
      if (!columns.micro_column || c != *columns.micro_column) stress.push_back(c);
  if (variant.micro_scalar && !columns.micro_column)
    throw ValidationError(variant.name + " needs a scalar microstructure column");
  if ((variant.scalar || variant.interaction) && stress.empty())
    throw ValidationError(variant.name + " needs at least one stress covariate column");

  ModelConfig c = base;
  c.include_scalar = variant.scalar || variant.micro_scalar;
  c.include_functional = variant.functional;
  c.include_interaction = variant.interaction;
  c.include_latent = variant.latent;
  c.basis.order += variant.extra_order;
  c.scalar_columns = stress;
  if (variant.micro_scalar) c.scalar_columns.push_back(*columns.micro_column);
  return c;
}

Metrics evaluate_fit(const FittedModel& model, const DegradationDataset& test) {
  const auto& d = model.designs;
  VectorXd fitted(d.num_observations());
  for (std::size_t i = 0; i < d.units.size(); ++i) {
    const auto& u = d.units[i];
    VectorXd f = u.observed * model.fit.params.zeta;
    if (d.latent_dim > 0) f += u.latent * model.fit.posterior.mu[i];
    fitted.segment(d.row_offsets[i], f.size()) = f;
  }
  Metrics m;
  const ResidualMetrics train = residual_metrics(d.y, fitted);
  m.r2 = train.r2;
  m.mse_train = train.mse;
  m.loglik = model.fit.loglik();
  m.p = count_parameters(d, model.config.constrain_sigma_gamma_diagonal);
  m.n = d.num_observations();
  const InformationCriteria ic = information_criteria(m.loglik, m.p, m.n);
  m.aic = ic.aic;
  m.bic = ic.bic;
  m.converged = model.fit.converged;
  m.cv_error = kNaN;

  double sse = 0.0;
  Index count = 0;
  for (const auto& u : test.units) {
    const auto i = model.unit_index(u.unit_id);
    if (!i) throw ValidationError("held-out readings for unit " + u.unit_id + " which is not in the training data");
    const VectorXd y = u.responses.array() - model.baselines(static_cast<Index>(*i));
    sse += (y - predict_unit(model, u, u.times, true)).squaredNorm();
    count += y.size();
  }
  m.mse_test = count > 0 ? sse / static_cast<double>(count) : kNaN;
  return m;
}

std::vector<ComparisonRow> compare_models(const DegradationDataset& ds, const std::vector<ModelVariant>& variants,
                                          const ModelConfig& base, const FitOptions& options,
                                          const CompareOptions& compare) {
  std::vector<ComparisonRow> rows;
  std::optional<TemporalSplit> split;
  if (compare.train_fraction < 1.0) split = temporal_split(ds, compare.train_fraction);
  for (const auto& v : variants) {
    ComparisonRow row;
    row.model = v.name;
    try {
      const ModelConfig config = variant_config(v, base, compare.columns, ds.P);
      const FittedModel model = fit_model(split ? split->train : ds, config, options);
      Metrics m = evaluate_fit(model, split ? split->test : DegradationDataset{});
      if (compare.folds > 0) m.cv_error = kfold_cv(ds, config, compare.folds, compare.seed, options).cv_error;
      row.metrics = m;
    } catch (const ValidationError& e) {
      row.error = e.what();
    } catch (const NumericalError& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) { return a.model < b.model; });
  return rows;
}

void write_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& out) {
  out << "model,r2,loglik,aic,bic,mse_train,mse_test,cv_error,p,n,converged,error\n";
  for (const auto& r : rows) {
    out << r.model;
    if (r.metrics) {
      const Metrics& m = *r.metrics;
      for (double v : {m.r2, m.loglik, m.aic, m.bic, m.mse_train, m.mse_test, m.cv_error}) out << ',' << csv_number(v);
      out << ',' << m.p << ',' << m.n << ',' << (m.converged ? "true" : "false") << ",\n";
    } else {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << ",nan,nan,nan,nan,nan,nan,nan,,,false," << msg << '\n';
    }
  }
}

std::vector<UnitEffects> effect_decomposition(const FittedModel& model) {
  const ZetaLayout& layout = model.designs.layout;
  const VectorXd& zeta = model.fit.params.zeta;
  const double R = model.support_length();
  const Index q = layout.num_levels();
  std::vector<UnitEffects> out;
  for (std::size_t i = 0; i < model.data.units.size(); ++i) {
    const auto& unit = model.data.units[i];
    UnitCovariates cov = covariates_for(model, unit);
    if (model.functional()) cov.scores = model.scores.per_unit[i];
    UnitEffects e;
    e.unit_id = unit.unit_id;
    e.levels = layout.levels();
    e.population = e.scalar = e.marginal = e.interaction = e.latent = VectorXd::Zero(q);
    for (Index a = 0; a < q; ++a) {
      e.population(a) = zeta(layout.nu(a));
      if (layout.has_scalar()) e.scalar(a) = zeta.segment(layout.beta(a), layout.P()).dot(cov.x);
      if (layout.has_functional()) {
        double v = 0.0;
        for (Index s = 0; s < layout.S(); ++s) v += zeta.segment(layout.b(a, s), layout.K()).dot(cov.scores.row(s));
        e.marginal(a) = R * v;
      }
      if (layout.has_interaction()) {
        double v = 0.0;
        for (Index p = 0; p < layout.P(); ++p) {
          double inner = 0.0;
          for (Index s = 0; s < layout.S(); ++s)
            inner += zeta.segment(layout.b_prime(a, p, s), layout.K()).dot(cov.scores.row(s));
          v += cov.x(p) * inner;
        }
        e.interaction(a) = R * v;
      }
    }
    e.fitted = coefficient_map(cov, R, layout) * zeta;
    if (model.designs.latent_dim > 0) {
      e.latent = model.fit.posterior.mu[i];
      e.fitted += e.latent;
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_effects_csv(const std::vector<UnitEffects>& effects, std::ostream& out) {
  out << "unit_id,level,marginal_effect,interaction_effect,latent_effect,population_effect,scalar_effect,eta\n";
  for (const auto& e : effects)
    for (std::size_t a = 0; a < e.levels.size(); ++a) {
      const auto k = static_cast<Index>(a);
      out << e.unit_id << ',' << e.levels[a] << ',' << format_double(e.marginal(k)) << ','
          << format_double(e.interaction(k)) << ',' << format_double(e.latent(k)) << ','
          << format_double(e.population(k)) << ',' << format_double(e.scalar(k)) << ','
          << format_double(e.fitted(k)) << '\n';
    }
}

}  // namespace degrade

#include "degrade/report.hpp"

#include "degrade/errors.hpp"

#include <fstream>
#include <set>
#include <string>

namespace degrade {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Json vec(const VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json mat(const MatrixXd& m) {
  Json a = Json::array();
  for (Index r = 0; r < m.rows(); ++r) a.push_back(vec(m.row(r).transpose()));
  return a;
}

VectorXd to_vec(const Json& j, const char* key) {
  if (!j.is_array()) throw ValidationError(std::string(key) + " must be an array of numbers");
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

MatrixXd to_mat(const Json& j, const char* key) {
  if (!j.is_array()) throw ValidationError(std::string(key) + " must be an array of rows");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows ? static_cast<Index>(j[0].size()) : 0;
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (static_cast<Index>(j[r].size()) != cols) throw ValidationError(std::string(key) + " is ragged");
    m.row(r) = to_vec(j[r], key).transpose();
  }
  return m;
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ValidationError(std::string("unknown ") + what + " key '" + key + "'");
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("bad JSON value: ") + e.what());
  }
}

}  // namespace

ModelConfig config_from_json(const Json& j, ModelConfig c) {
  check_keys(j,
             {"basis_order", "K", "fve", "include_scalar", "include_functional", "include_interaction",
              "include_latent", "center_baseline", "constrain_sigma_gamma_diagonal", "ridge", "scalar_columns"},
             "config");
  return guarded([&] {
    if (j.contains("basis_order")) c.basis.order = j["basis_order"].get<int>();
    if (j.contains("K")) c.K = j["K"].get<int>();
    if (j.contains("fve")) c.fve = j["fve"].get<double>();
    if (j.contains("include_scalar")) c.include_scalar = j["include_scalar"].get<bool>();
    if (j.contains("include_functional")) c.include_functional = j["include_functional"].get<bool>();
    if (j.contains("include_interaction")) c.include_interaction = j["include_interaction"].get<bool>();
    if (j.contains("include_latent")) c.include_latent = j["include_latent"].get<bool>();
    if (j.contains("center_baseline")) c.center_baseline = j["center_baseline"].get<bool>();
    if (j.contains("constrain_sigma_gamma_diagonal"))
      c.constrain_sigma_gamma_diagonal = j["constrain_sigma_gamma_diagonal"].get<bool>();
    if (j.contains("ridge")) c.ridge = j["ridge"].get<bool>();
    if (j.contains("scalar_columns")) c.scalar_columns = j["scalar_columns"].get<std::vector<Index>>();
    return c;
  });
}

Json config_to_json(const ModelConfig& c) {
  Json j;
  j["basis_order"] = c.basis.order;
  j["K"] = c.K;
  j["fve"] = c.fve;
  j["include_scalar"] = c.include_scalar;
  j["include_functional"] = c.include_functional;
  j["include_interaction"] = c.include_interaction;
  j["include_latent"] = c.include_latent;
  j["center_baseline"] = c.center_baseline;
  j["constrain_sigma_gamma_diagonal"] = c.constrain_sigma_gamma_diagonal;
  j["ridge"] = c.ridge;
  j["scalar_columns"] = c.scalar_columns;
  return j;
}

FitOptions fit_options_from_json(const Json& j, FitOptions o) {
  check_keys(j, {"max_iter", "tol", "staging"}, "fit option");
  return guarded([&] {
    if (j.contains("max_iter")) o.max_iter = j["max_iter"].get<int>();
    if (j.contains("tol")) o.tol = j["tol"].get<double>();
    if (j.contains("staging")) {
      const auto s = j["staging"].get<std::string>();
      if (s == "posterior")
        o.staging = SigmaEpsStaging::posterior;
      else if (s == "printed")
        o.staging = SigmaEpsStaging::printed;
      else
        throw ValidationError("staging must be 'posterior' or 'printed'");
    }
    if (o.max_iter < 1) throw ValidationError("max_iter must be >= 1");
    if (!(o.tol > 0.0)) throw ValidationError("tol must be positive");
    return o;
  });
}

Json fit_options_to_json(const FitOptions& o) {
  Json j;
  j["max_iter"] = o.max_iter;
  j["tol"] = o.tol;
  j["staging"] = o.staging == SigmaEpsStaging::posterior ? "posterior" : "printed";
  return j;
}

SyntheticSpec spec_from_json(const Json& j) {
  check_keys(j,
             {"seed", "N", "m", "t_max", "basis_order", "center_baseline", "P", "S", "K_true", "include_scalar",
              "include_functional", "include_interaction", "include_latent", "zeta", "sigma_eps2", "sigma_gamma",
              "scalar_low", "scalar_high", "grid_points", "score_variances", "decorrelate_scores",
              "emit_micro_scalar"},
             "spec");
  return guarded([&] {
    SyntheticSpec s = default_spec(j.value("seed", std::uint64_t{1}));
    s.N = j.value("N", s.N);
    s.m = j.value("m", s.m);
    s.basis.order = j.value("basis_order", s.basis.order);
    s.center_baseline = j.value("center_baseline", s.center_baseline);
    s.P = j.value("P", s.P);
    s.S = j.value("S", s.S);
    s.K_true = j.value("K_true", s.K_true);
    s.include_scalar = j.value("include_scalar", s.include_scalar);
    s.include_functional = j.value("include_functional", s.include_functional);
    s.include_interaction = j.value("include_interaction", s.include_interaction);
    s.include_latent = j.value("include_latent", s.include_latent);
    s.sigma_eps2 = j.value("sigma_eps2", s.sigma_eps2);
    s.decorrelate_scores = j.value("decorrelate_scores", s.decorrelate_scores);
    s.emit_micro_scalar = j.value("emit_micro_scalar", s.emit_micro_scalar);
    if (s.N < 1 || s.m < 1 || s.P < 0 || s.S < 0 || s.K_true < 1)
      throw ValidationError("spec needs N, m, K_true >= 1 and P, S >= 0");

    s.times = VectorXd::LinSpaced(s.m, 0.0, j.value("t_max", 1.0));
    if (j.contains("zeta")) s.zeta = to_vec(j["zeta"], "zeta");
    if (j.contains("sigma_gamma")) s.sigma_gamma = to_mat(j["sigma_gamma"], "sigma_gamma");
    if (!s.include_latent && !j.contains("sigma_gamma")) s.sigma_gamma.resize(0, 0);
    if (j.contains("scalar_low")) s.scalar_low = to_vec(j["scalar_low"], "scalar_low");
    else if (s.P != 1) s.scalar_low = VectorXd::Constant(s.P, -1.0);
    if (j.contains("scalar_high")) s.scalar_high = to_vec(j["scalar_high"], "scalar_high");
    else if (s.P != 1) s.scalar_high = VectorXd::Constant(s.P, 1.0);

    const Index G = j.value("grid_points", Index{51});
    if (G < 2) throw ValidationError("grid_points must be >= 2");
    s.r_grid = s.S > 0 ? VectorXd::LinSpaced(G, 0.0, 1.0) : VectorXd();
    s.mean_curves.clear();
    s.modes.clear();
    s.score_variances.clear();
    for (Index c = 0; c < s.S; ++c) {
      s.mean_curves.push_back(1.0 - 0.5 * s.r_grid.array());
      s.modes.push_back(cosine_modes(s.r_grid, s.K_true));
      VectorXd var(s.K_true);
      for (Index k = 0; k < s.K_true; ++k) var(k) = 1.0 / static_cast<double>(k + 1);
      s.score_variances.push_back(var);
    }
    if (j.contains("score_variances")) {
      const auto& sv = j["score_variances"];
      if (!sv.is_array() || static_cast<Index>(sv.size()) != s.S)
        throw ValidationError("score_variances needs one array per functional covariate");
      for (Index c = 0; c < s.S; ++c) s.score_variances[static_cast<std::size_t>(c)] = to_vec(sv[c], "score_variances");
    }
    s.validate();
    return s;
  });
}

Json spec_to_json(const SyntheticSpec& s) {
  Json j;
  j["seed"] = s.seed;
  j["N"] = s.N;
  j["m"] = s.m;
  j["t_max"] = s.times.size() ? s.times(s.times.size() - 1) : 0.0;
  j["basis_order"] = s.basis.order;
  j["center_baseline"] = s.center_baseline;
  j["P"] = s.P;
  j["S"] = s.S;
  j["K_true"] = s.K_true;
  j["include_scalar"] = s.include_scalar;
  j["include_functional"] = s.include_functional;
  j["include_interaction"] = s.include_interaction;
  j["include_latent"] = s.include_latent;
  j["zeta"] = vec(s.zeta);
  j["sigma_eps2"] = s.sigma_eps2;
  j["sigma_gamma"] = mat(s.sigma_gamma);
  j["scalar_low"] = vec(s.scalar_low);
  j["scalar_high"] = vec(s.scalar_high);
  j["grid_points"] = s.r_grid.size();
  Json sv = Json::array();
  for (const auto& v : s.score_variances) sv.push_back(vec(v));
  j["score_variances"] = sv;
  j["decorrelate_scores"] = s.decorrelate_scores;
  j["emit_micro_scalar"] = s.emit_micro_scalar;
  return j;
}

Json fpca_to_json(const FpcaModel& f) {
  Json j;
  j["K"] = f.K;
  j["R"] = f.R;
  j["eigenvalues"] = vec(f.eigenvalues);
  j["fve"] = vec(f.fve_trace);
  j["r_grid"] = vec(f.r_grid);
  j["mean_curve"] = vec(f.mean_curve);
  j["eigenfunctions"] = mat(f.eigenfunctions.leftCols(f.K).transpose());
  return j;
}

Json fit_report(const FittedModel& model) {
  const auto& layout = model.designs.layout;
  const auto& params = model.fit.params;
  Json j;
  j["config"] = config_to_json(model.config);
  j["K"] = model.K;
  Json fpca = Json::array();
  for (const auto& f : model.fpca) fpca.push_back(fpca_to_json(f));
  j["fpca"] = fpca;
  Json zeta = Json::array();
  for (Index c = 0; c < layout.U(); ++c) zeta.push_back({{"name", layout.column_name(c)}, {"value", params.zeta(c)}});
  j["zeta"] = zeta;
  j["sigma_eps2"] = params.sigma_eps2;
  j["sigma_gamma"] = mat(params.sigma_gamma);
  Json post = Json::array();
  for (std::size_t i = 0; i < model.designs.units.size(); ++i) {
    Json u;
    u["unit_id"] = model.designs.units[i].unit_id;
    u["mu"] = vec(model.fit.posterior.mu[i]);
    post.push_back(u);
  }
  j["latent_posterior"] = post;
  j["loglik"] = model.fit.loglik();
  j["loglik_trace"] = model.fit.loglik_trace;
  j["iterations"] = model.fit.iterations;
  j["converged"] = model.fit.converged;
  const Metrics m = evaluate_fit(model, DegradationDataset{});
  j["parameter_count"] = m.p;
  j["parameter_count_convention"] = "p = U + 1 + free entries of Sigma_gamma; BIC uses the number of fitted observations";
  j["observations"] = m.n;
  j["aic"] = m.aic;
  j["bic"] = m.bic;
  j["r2"] = m.r2;
  j["mse_train"] = m.mse_train;
  return j;
}

Json metrics_to_json(const Metrics& m) {
  Json j;
  j["r2"] = m.r2;
  j["loglik"] = m.loglik;
  j["aic"] = m.aic;
  j["bic"] = m.bic;
  j["mse_train"] = m.mse_train;
  j["mse_test"] = m.mse_test;
  j["cv_error"] = m.cv_error;
  j["p"] = m.p;
  j["n"] = m.n;
  j["converged"] = m.converged;
  return j;
}

Json truth_to_json(const SyntheticData& data) {
  const auto& t = data.truth;
  Json j;
  j["zeta"] = vec(t.zeta);
  j["sigma_eps2"] = t.sigma_eps2;
  j["sigma_gamma"] = mat(t.sigma_gamma);
  Json units = Json::array();
  for (std::size_t i = 0; i < data.dataset.units.size(); ++i) {
    Json u;
    u["unit_id"] = data.dataset.units[i].unit_id;
    u["gamma"] = vec(t.gamma.row(static_cast<Index>(i)).transpose());
    u["scores"] = i < t.scores.per_unit.size() ? mat(t.scores.per_unit[i]) : Json::array();
    units.push_back(u);
  }
  j["units"] = units;
  return j;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace degrade

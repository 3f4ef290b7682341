#include "degrade/simulate.hpp"

#include "degrade/design.hpp"
#include "degrade/errors.hpp"
#include "degrade/random.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace degrade {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ZetaLayout spec_layout(const SyntheticSpec& spec) {
  return ZetaLayout(spec.levels(), spec.P, spec.S, spec.K_true, spec.include_scalar, spec.include_functional,
                    spec.include_interaction);
}

Index latent_dim(const SyntheticSpec& spec) {
  return spec.include_latent ? static_cast<Index>(spec.levels().size()) : 0;
}

}  // namespace

std::vector<int> SyntheticSpec::levels() const {
  std::vector<int> out;
  for (int l = center_baseline ? 1 : 0; l <= basis.order; ++l) out.push_back(l);
  return out;
}

ModelConfig SyntheticSpec::model_config() const {
  ModelConfig c;
  c.basis = basis;
  c.K = static_cast<int>(K_true);
  c.include_scalar = include_scalar;
  c.include_functional = include_functional;
  c.include_interaction = include_interaction;
  c.include_latent = include_latent;
  c.center_baseline = center_baseline;
  for (Index p = 0; p < P; ++p) c.scalar_columns.push_back(p);
  return c;
}

void SyntheticSpec::validate() const {
  if (N < 1 || m < 1) throw ValidationError("synthetic spec needs N >= 1 and m >= 1");
  if (times.size() != m) throw ValidationError("synthetic spec: times must have m entries");
  for (Index j = 1; j < m; ++j)
    if (!(times(j) > times(j - 1))) throw ValidationError("synthetic spec: times must increase");
  if (center_baseline && (basis.order < 1 || times(0) != 0.0))
    throw ValidationError("centered synthetic spec needs order >= 1 and a first time of 0");
  if (zeta.size() != spec_layout(*this).U()) throw ValidationError("synthetic spec: zeta does not match the layout");
  if (!(sigma_eps2 >= 0.0)) throw ValidationError("synthetic spec: sigma_eps2 must be nonnegative");
  const Index q = latent_dim(*this);
  if (sigma_gamma.rows() != q || sigma_gamma.cols() != q)
    throw ValidationError("synthetic spec: sigma_gamma must be q x q");
  if (q > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sigma_gamma, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12) throw ValidationError("synthetic spec: sigma_gamma is not PSD");
  }
  if (scalar_low.size() != P || scalar_high.size() != P) throw ValidationError("synthetic spec: scalar bounds");
  if (S > 0) {
    if (r_grid.size() < 2) throw ValidationError("synthetic spec: r grid too short");
    if (static_cast<Index>(mean_curves.size()) != S || static_cast<Index>(modes.size()) != S ||
        static_cast<Index>(score_variances.size()) != S)
      throw ValidationError("synthetic spec: functional covariate descriptions must have S entries");
    for (Index s = 0; s < S; ++s) {
      if (mean_curves[s].size() != r_grid.size() || modes[s].rows() != r_grid.size() ||
          modes[s].cols() != K_true || score_variances[s].size() != K_true)
        throw ValidationError("synthetic spec: functional covariate dimensions");
      if ((score_variances[s].array() < 0.0).any()) throw ValidationError("synthetic spec: negative score variance");
    }
  }
  if (emit_micro_scalar && S < 1) throw ValidationError("micro scalar needs a functional covariate");
}

MatrixXd cosine_modes(const VectorXd& r_grid, Index K) {
  const double r0 = r_grid(0);
  const double R = r_grid(r_grid.size() - 1) - r0;
  MatrixXd modes(r_grid.size(), K);
  for (Index k = 0; k < K; ++k)
    for (Index g = 0; g < r_grid.size(); ++g)
      modes(g, k) = std::sqrt(2.0) * std::cos(static_cast<double>(k + 1) * std::numbers::pi * (r_grid(g) - r0) / R);
  return modes;
}

SyntheticSpec default_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.zeta.resize(6);
  spec.zeta << 1.0, 0.8, 0.6, -0.4, 0.5, 0.3;  // nu_1, beta_1, b_11, b'_111
  spec.sigma_eps2 = 0.01;
  spec.sigma_gamma = MatrixXd::Constant(1, 1, 0.01);
  // Standardized load; a positive range makes x * c nearly collinear with c.
  spec.scalar_low = VectorXd::Constant(1, -1.0);
  spec.scalar_high = VectorXd::Constant(1, 1.0);
  spec.r_grid = VectorXd::LinSpaced(51, 0.0, 1.0);
  spec.mean_curves = {1.0 - 0.5 * spec.r_grid.array()};
  spec.modes = {cosine_modes(spec.r_grid, 2)};
  spec.score_variances = {(VectorXd(2) << 1.0, 0.5).finished()};
  spec.times = VectorXd::LinSpaced(spec.m, 0.0, 1.0);
  return spec;
}

FunctionalDraw generate_functional_covariates(const SyntheticSpec& spec, Rng& rng) {
  FunctionalDraw draw;
  draw.scores.S = spec.S;
  draw.scores.K = spec.K_true;
  draw.scores.per_unit.assign(static_cast<std::size_t>(spec.N), MatrixXd::Zero(spec.S, spec.K_true));
  draw.curves.assign(static_cast<std::size_t>(spec.N), {});
  if (spec.S == 0) return draw;

  const double R = spec.r_grid(spec.r_grid.size() - 1) - spec.r_grid(0);
  const VectorXd w = trapezoid_weights<double>(spec.r_grid) / R;
  for (Index s = 0; s < spec.S; ++s) {
    const MatrixXd gram = spec.modes[s].transpose() * w.asDiagonal() * spec.modes[s];
    if ((gram - MatrixXd::Identity(spec.K_true, spec.K_true)).cwiseAbs().maxCoeff() > 1e-8)
      throw ValidationError("mode shapes are not orthonormal under the (1/R) inner product");
  }

  for (Index s = 0; s < spec.S; ++s) {
    MatrixXd c(spec.N, spec.K_true);
    for (Index i = 0; i < spec.N; ++i)
      for (Index k = 0; k < spec.K_true; ++k) c(i, k) = std::sqrt(spec.score_variances[s](k)) * rng.normal();
    if (spec.decorrelate_scores && spec.N > spec.K_true) {
      c.rowwise() -= c.colwise().mean();
      const MatrixXd cov = c.transpose() * c / static_cast<double>(spec.N);
      Eigen::LLT<MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success) throw NumericalError("cannot decorrelate synthetic scores");
      MatrixXd white = llt.matrixU().solve<Eigen::OnTheRight>(c);
      c = white * spec.score_variances[s].cwiseSqrt().asDiagonal();
    }
    for (Index i = 0; i < spec.N; ++i) draw.scores.per_unit[static_cast<std::size_t>(i)].row(s) = c.row(i);
  }
  for (Index i = 0; i < spec.N; ++i) {
    auto& unit_curves = draw.curves[static_cast<std::size_t>(i)];
    for (Index s = 0; s < spec.S; ++s)
      unit_curves.push_back(spec.mean_curves[s] +
                            spec.modes[s] * draw.scores.per_unit[static_cast<std::size_t>(i)].row(s).transpose());
  }
  return draw;
}

FunctionalDraw generate_functional_covariates(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  return generate_functional_covariates(spec, rng);
}

VectorXd true_coefficients(const SyntheticSpec& spec, const VectorXd& x, const MatrixXd& scores,
                           const VectorXd& gamma) {
  const ZetaLayout layout = spec_layout(spec);
  const double R = spec.S > 0 ? spec.r_grid(spec.r_grid.size() - 1) - spec.r_grid(0) : 0.0;
  const Index q = layout.num_levels();
  VectorXd eta(q);
  for (Index a = 0; a < q; ++a) {
    double v = spec.zeta(layout.nu(a));
    if (layout.has_scalar()) v += spec.zeta.segment(layout.beta(a), spec.P).dot(x);
    if (layout.has_functional())
      for (Index s = 0; s < spec.S; ++s) v += R * spec.zeta.segment(layout.b(a, s), spec.K_true).dot(scores.row(s));
    if (layout.has_interaction())
      for (Index p = 0; p < spec.P; ++p) {
        double inner = 0.0;
        for (Index s = 0; s < spec.S; ++s) inner += spec.zeta.segment(layout.b_prime(a, p, s), spec.K_true).dot(scores.row(s));
        v += R * x(p) * inner;
      }
    if (gamma.size() > 0) v += gamma(a);
    eta(a) = v;
  }
  return eta;
}

SyntheticData generate_dataset(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const FunctionalDraw draw = generate_functional_covariates(spec, rng);
  const auto levels = spec.levels();
  const Index q = latent_dim(spec);

  SyntheticData out;
  out.truth.zeta = spec.zeta;
  out.truth.sigma_eps2 = spec.sigma_eps2;
  out.truth.sigma_gamma = spec.sigma_gamma;
  out.truth.scores = draw.scores;
  out.truth.gamma = MatrixXd::Zero(spec.N, q);

  MatrixXd gamma_factor;
  if (q > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(spec.sigma_gamma);
    gamma_factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  auto& ds = out.dataset;
  ds.P = spec.P + (spec.emit_micro_scalar ? 1 : 0);
  ds.S = spec.S;
  ds.r_grid = spec.S > 0 ? spec.r_grid : VectorXd();
  const double R = spec.S > 0 ? spec.r_grid(spec.r_grid.size() - 1) - spec.r_grid(0) : 1.0;
  const VectorXd w = spec.S > 0 ? VectorXd(trapezoid_weights<double>(spec.r_grid) / R) : VectorXd();

  for (Index i = 0; i < spec.N; ++i) {
    UnitRecord u;
    char id[32];
    std::snprintf(id, sizeof(id), "u%04ld", static_cast<long>(i + 1));
    u.unit_id = id;
    u.times = spec.times;
    VectorXd x(spec.P);
    for (Index p = 0; p < spec.P; ++p) x(p) = rng.uniform(spec.scalar_low(p), spec.scalar_high(p));
    u.scalars.resize(ds.P);
    u.scalars.head(spec.P) = x;
    u.curves = draw.curves[static_cast<std::size_t>(i)];
    if (spec.emit_micro_scalar) u.scalars(spec.P) = std::sqrt(w.dot(u.curves[0].cwiseAbs2()));

    VectorXd gamma = VectorXd::Zero(q);
    if (q > 0) {
      VectorXd z(q);
      for (Index a = 0; a < q; ++a) z(a) = rng.normal();
      gamma = gamma_factor * z;
      out.truth.gamma.row(i) = gamma.transpose();
    }
    const VectorXd eta = true_coefficients(spec, x, draw.scores.per_unit[static_cast<std::size_t>(i)], gamma);
    const double sd = std::sqrt(spec.sigma_eps2);
    u.responses.resize(spec.m);
    for (Index j = 0; j < spec.m; ++j) {
      const VectorXd phi = evaluate_basis(spec.basis, spec.times(j));
      double mean = 0.0;
      for (std::size_t a = 0; a < levels.size(); ++a) mean += eta(static_cast<Index>(a)) * phi(levels[a]);
      // The centered baseline reading is exactly zero (phi_l(0) = 0 for l >= 1).
      u.responses(j) = (spec.center_baseline && j == 0) ? mean : mean + sd * rng.normal();
    }
    ds.units.push_back(std::move(u));
  }
  ds.validate();
  return out;
}

}  // namespace degrade

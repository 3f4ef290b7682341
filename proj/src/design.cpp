#include "degrade/design.hpp"

#include "degrade/errors.hpp"

#include <fstream>

namespace degrade {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

ZetaLayout::ZetaLayout(std::vector<int> levels, Index P, Index S, Index K, bool scalar,
                       bool functional, bool interaction)
    : levels_(std::move(levels)), P_(P), S_(S), K_(K), scalar_(scalar && P > 0),
      functional_(functional && S > 0 && K > 0), interaction_(interaction && P > 0 && S > 0 && K > 0) {
  const Index q = num_levels();
  if (q == 0) throw ValidationError("layout needs at least one coefficient level");
  Index off = 0;
  auto push = [&](std::string name, Index size) {
    segments_.push_back({std::move(name), off, size});
    off += size;
  };
  push("nu", q);
  beta0_ = off;
  if (scalar_)
    for (Index a = 0; a < q; ++a) push("beta_" + std::to_string(levels_[a]), P_);
  b0_ = off;
  if (functional_)
    for (Index a = 0; a < q; ++a)
      for (Index s = 0; s < S_; ++s) push("b_" + std::to_string(levels_[a]) + "_" + std::to_string(s + 1), K_);
  bp0_ = off;
  if (interaction_)
    for (Index a = 0; a < q; ++a)
      for (Index p = 0; p < P_; ++p)
        for (Index s = 0; s < S_; ++s)
          push("bp_" + std::to_string(levels_[a]) + "_" + std::to_string(p + 1) + "_" + std::to_string(s + 1), K_);
  U_ = off;
}

ZetaLayout ZetaLayout::from_config(const ModelConfig& config, Index P, Index S, Index K) {
  return ZetaLayout(config.levels(), P, S, K, config.include_scalar, config.include_functional,
                    config.include_interaction);
}

Index ZetaLayout::beta(Index a) const { return beta0_ + a * P_; }
Index ZetaLayout::b(Index a, Index s) const { return b0_ + (a * S_ + s) * K_; }
Index ZetaLayout::b_prime(Index a, Index p, Index s) const { return bp0_ + ((a * P_ + p) * S_ + s) * K_; }

std::string ZetaLayout::column_name(Index col) const {
  for (const auto& seg : segments_)
    if (col >= seg.offset && col < seg.offset + seg.size)
      return seg.name + "[" + std::to_string(col - seg.offset + 1) + "]";
  throw ValidationError("column " + std::to_string(col) + " outside the layout");
}

MatrixXd build_latent_design(const VectorXd& times, const BasisFamily& basis, const std::vector<int>& levels) {
  MatrixXd lambda(times.size(), static_cast<Index>(levels.size()));
  for (Index u = 0; u < times.size(); ++u) {
    const VectorXd phi = evaluate_basis(basis, times(u));
    for (std::size_t a = 0; a < levels.size(); ++a) lambda(u, static_cast<Index>(a)) = phi(levels[a]);
  }
  return lambda;
}

namespace {

void check_covariates(const UnitCovariates& cov, const ZetaLayout& layout) {
  if ((layout.has_scalar() || layout.has_interaction()) && cov.x.size() != layout.P())
    throw ValidationError("scalar covariate count does not match the layout");
  if ((layout.has_functional() || layout.has_interaction()) &&
      (cov.scores.rows() != layout.S() || cov.scores.cols() < layout.K()))
    throw ValidationError("score block does not match the layout");
}

}  // namespace

MatrixXd build_observed_design(const VectorXd& times, const BasisFamily& basis, const UnitCovariates& cov,
                               double R, const ZetaLayout& layout) {
  check_covariates(cov, layout);
  const Index m = times.size();
  const auto& levels = layout.levels();
  MatrixXd omega = MatrixXd::Zero(m, layout.U());
  for (Index u = 0; u < m; ++u) {
    const VectorXd phi = evaluate_basis(basis, times(u));
    for (Index a = 0; a < layout.num_levels(); ++a) {
      const double f = phi(levels[static_cast<std::size_t>(a)]);
      omega(u, layout.nu(a)) = f;
      if (layout.has_scalar())
        for (Index v = 0; v < layout.P(); ++v) omega(u, layout.beta(a) + v) = cov.x(v) * f;
      if (layout.has_functional())
        for (Index s = 0; s < layout.S(); ++s)
          for (Index v = 0; v < layout.K(); ++v) omega(u, layout.b(a, s) + v) = R * cov.scores(s, v) * f;
      if (layout.has_interaction())
        for (Index p = 0; p < layout.P(); ++p)
          for (Index s = 0; s < layout.S(); ++s)
            for (Index v = 0; v < layout.K(); ++v)
              omega(u, layout.b_prime(a, p, s) + v) = R * cov.x(p) * cov.scores(s, v) * f;
    }
  }
  return omega;
}

MatrixXd coefficient_map(const UnitCovariates& cov, double R, const ZetaLayout& layout) {
  check_covariates(cov, layout);
  const Index q = layout.num_levels();
  MatrixXd g = MatrixXd::Zero(q, layout.U());
  for (Index a = 0; a < q; ++a) {
    g(a, layout.nu(a)) = 1.0;
    if (layout.has_scalar()) g.row(a).segment(layout.beta(a), layout.P()) = cov.x.transpose();
    if (layout.has_functional())
      for (Index s = 0; s < layout.S(); ++s)
        g.row(a).segment(layout.b(a, s), layout.K()) = R * cov.scores.row(s).head(layout.K());
    if (layout.has_interaction())
      for (Index p = 0; p < layout.P(); ++p)
        for (Index s = 0; s < layout.S(); ++s)
          g.row(a).segment(layout.b_prime(a, p, s), layout.K()) = R * cov.x(p) * cov.scores.row(s).head(layout.K());
  }
  return g;
}

void stack_population(DesignMatrices& designs) {
  const Index U = designs.layout.U();
  const Index q = designs.latent_dim;
  Index n = 0;
  designs.row_offsets.clear();
  for (const auto& u : designs.units) {
    if (u.observed.cols() != U || u.latent.cols() != q)
      throw ValidationError("unit " + u.unit_id + ": inconsistent design column count");
    if (u.observed.rows() != u.y.size() || u.latent.rows() != u.y.size())
      throw ValidationError("unit " + u.unit_id + ": inconsistent design row count");
    designs.row_offsets.push_back(n);
    n += u.y.size();
  }
  const Index N = designs.num_units();
  designs.omega.resize(n, U);
  designs.lambda = MatrixXd::Zero(n, q * N);
  designs.y.resize(n);
  for (Index i = 0; i < N; ++i) {
    const auto& u = designs.units[static_cast<std::size_t>(i)];
    const Index r0 = designs.row_offsets[static_cast<std::size_t>(i)];
    const Index m = u.y.size();
    designs.omega.middleRows(r0, m) = u.observed;
    designs.lambda.block(r0, i * q, m, q) = u.latent;
    designs.y.segment(r0, m) = u.y;
  }
}

UnitCovariates unit_covariates(const UnitRecord& unit, const ScoreSet* scores, std::size_t index,
                               const std::vector<Index>& scalar_columns, Index K) {
  UnitCovariates cov;
  cov.x.resize(static_cast<Index>(scalar_columns.size()));
  for (std::size_t p = 0; p < scalar_columns.size(); ++p) {
    if (scalar_columns[p] >= unit.scalars.size()) throw ValidationError("missing covariates for unit " + unit.unit_id);
    cov.x(static_cast<Index>(p)) = unit.scalars(scalar_columns[p]);
  }
  if (scores) {
    if (index >= scores->per_unit.size()) throw ValidationError("missing scores for unit " + unit.unit_id);
    cov.scores = scores->per_unit[index].leftCols(K);
  }
  return cov;
}

DesignMatrices build_designs(const DegradationDataset& ds, const ScoreSet* scores, const ModelConfig& config,
                             Index K) {
  config.validate(ds.P, ds.S);
  const auto columns = config.active_scalar_columns(ds.P);
  const bool functional = config.include_functional || config.include_interaction;
  if (functional && (!scores || scores->K < K || K < 1))
    throw ValidationError("functional terms need K >= 1 scores per covariate");

  DesignMatrices designs;
  designs.layout = ZetaLayout::from_config(config, static_cast<Index>(columns.size()), functional ? ds.S : 0,
                                           functional ? K : 0);
  const auto levels = config.levels();
  designs.latent_dim = config.include_latent ? static_cast<Index>(levels.size()) : 0;
  const double R = ds.support_length();
  for (std::size_t i = 0; i < ds.units.size(); ++i) {
    const auto& unit = ds.units[i];
    const auto cov = unit_covariates(unit, functional ? scores : nullptr, i, columns, K);
    UnitDesign d;
    d.unit_id = unit.unit_id;
    d.observed = build_observed_design(unit.times, config.basis, cov, R, designs.layout);
    d.latent = config.include_latent ? build_latent_design(unit.times, config.basis, levels)
                                     : MatrixXd(unit.times.size(), 0);
    d.y = unit.responses;
    designs.units.push_back(std::move(d));
  }
  stack_population(designs);
  return designs;
}

void dump_design(const DesignMatrices& designs, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "layout.csv", std::ios::binary);
    out << "segment,offset,size\n";
    for (const auto& seg : designs.layout.segments()) out << seg.name << ',' << seg.offset << ',' << seg.size << '\n';
  }
  auto write = [](const MatrixXd& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
      out << '\n';
    }
  };
  for (const auto& u : designs.units) {
    write(u.observed, dir / ("omega_" + u.unit_id + ".csv"));
    write(u.latent, dir / ("lambda_" + u.unit_id + ".csv"));
  }
}

}  // namespace degrade

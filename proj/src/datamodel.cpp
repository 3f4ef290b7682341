#include "degrade/datamodel.hpp"

#include "csv.hpp"
#include "degrade/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

namespace degrade {

using Eigen::Index;

Index DegradationDataset::total_observations() const {
  Index n = 0;
  for (const auto& u : units) n += u.times.size();
  return n;
}

double DegradationDataset::support_length() const {
  if (r_grid.size() < 2) return 0.0;
  return r_grid(r_grid.size() - 1) - r_grid(0);
}

void DegradationDataset::validate() const {
  if (units.empty()) throw ValidationError("dataset has no units");
  if (S > 0 && r_grid.size() < 2) throw ValidationError("functional grid needs at least 2 points");
  for (Index g = 1; g < r_grid.size(); ++g)
    if (!(r_grid(g) > r_grid(g - 1))) throw ValidationError("r grid must be strictly increasing");
  std::set<std::string> seen;
  for (const auto& u : units) {
    if (!seen.insert(u.unit_id).second) throw ValidationError("duplicate unit " + u.unit_id);
    if (u.times.size() == 0) throw ValidationError("unit " + u.unit_id + " has no measurements");
    if (u.times.size() != u.responses.size())
      throw ValidationError("unit " + u.unit_id + ": times and responses differ in length");
    for (Index j = 1; j < u.times.size(); ++j)
      if (!(u.times(j) > u.times(j - 1)))
        throw ValidationError("unit " + u.unit_id + ": non-increasing times");
    if (u.scalars.size() != P)
      throw ValidationError("unit " + u.unit_id + ": expected " + std::to_string(P) + " scalars");
    if (static_cast<Index>(u.curves.size()) != S)
      throw ValidationError("unit " + u.unit_id + ": expected " + std::to_string(S) + " curves");
    for (const auto& c : u.curves)
      if (c.size() != r_grid.size())
        throw ValidationError("unit " + u.unit_id + ": ragged functional grid");
    if (!u.times.allFinite() || !u.responses.allFinite() || !u.scalars.allFinite())
      throw ValidationError("unit " + u.unit_id + ": non-finite value");
  }
}

void ModelConfig::validate(Index P, Index S) const {
  if (basis.order < 0) throw ValidationError("basis order must be nonnegative");
  if (!include_scalar && !include_functional && !include_interaction && !include_latent)
    throw ValidationError("at least one model component must be enabled");
  if (center_baseline && basis.order < 1)
    throw ValidationError("centered models need basis order >= 1");
  if ((include_functional || include_interaction) && S == 0)
    throw ValidationError("functional terms requested but dataset has no functional covariates");
  if ((include_functional || include_interaction) && K < 0)
    throw ValidationError("K must be >= 1 when functional terms are enabled");
  if (!(fve > 0.0 && fve <= 1.0)) throw ValidationError("fve threshold must lie in (0, 1]");
  for (Index c : scalar_columns)
    if (c < 0 || c >= P) throw ValidationError("scalar column " + std::to_string(c) + " out of range");
}

std::vector<int> ModelConfig::levels() const {
  std::vector<int> out;
  for (int l = center_baseline ? 1 : 0; l <= basis.order; ++l) out.push_back(l);
  return out;
}

std::vector<Index> ModelConfig::active_scalar_columns(Index P) const {
  if (!scalar_columns.empty()) return scalar_columns;
  std::vector<Index> all(static_cast<std::size_t>(P));
  std::iota(all.begin(), all.end(), Index{0});
  return all;
}

DegradationDataset center_baseline(DegradationDataset ds) {
  for (auto& u : ds.units) {
    if (u.responses.size() == 0) continue;
    const double base = u.responses(0);
    u.responses.array() -= base;
    u.responses(0) = 0.0;
  }
  return ds;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw ValidationError("cannot format number");
  return std::string(buf, ptr);
}

namespace {

void expect_header(const detail::CsvTable& t, const std::vector<std::string>& want,
                   const std::string& file) {
  if (t.header != want) {
    std::string joined;
    for (const auto& w : want) joined += (joined.empty() ? "" : ",") + w;
    throw ValidationError(file + ": header must be " + joined);
  }
}

}  // namespace

DegradationDataset load_dataset(const std::filesystem::path& responses_file,
                                const std::filesystem::path& scalars_file,
                                const std::filesystem::path& curves_file) {
  const auto resp = detail::read_csv(responses_file);
  expect_header(resp, {"unit_id", "time", "y"}, responses_file.filename().string());

  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (std::size_t k = 0; k < resp.rows.size(); ++k) {
    const auto& row = resp.rows[k];
    const std::string ctx = responses_file.filename().string() + ":" + std::to_string(resp.line_numbers[k]);
    series[row[0]].emplace_back(detail::parse_double(row[1], ctx), detail::parse_double(row[2], ctx));
  }
  if (series.empty()) throw ValidationError("responses file has no rows");

  const auto scal = detail::read_csv(scalars_file);
  if (scal.header.empty() || scal.header[0] != "unit_id")
    throw ValidationError(scalars_file.filename().string() + ": header must start with unit_id");
  const Index P = static_cast<Index>(scal.header.size()) - 1;
  for (Index p = 0; p < P; ++p)
    if (scal.header[static_cast<std::size_t>(p + 1)] != "x" + std::to_string(p + 1))
      throw ValidationError(scalars_file.filename().string() + ": scalar columns must be x1..xP");
  std::map<std::string, Eigen::VectorXd> scalars;
  for (std::size_t k = 0; k < scal.rows.size(); ++k) {
    const auto& row = scal.rows[k];
    const std::string ctx = scalars_file.filename().string() + ":" + std::to_string(scal.line_numbers[k]);
    Eigen::VectorXd x(P);
    for (Index p = 0; p < P; ++p) x(p) = detail::parse_double(row[static_cast<std::size_t>(p + 1)], ctx);
    if (!scalars.emplace(row[0], x).second) throw ValidationError(ctx + ": duplicate unit " + row[0]);
  }

  const auto curv = detail::read_csv(curves_file);
  expect_header(curv, {"unit_id", "s", "r", "z"}, curves_file.filename().string());
  // unit -> s -> [(r, z)]
  std::map<std::string, std::map<long, std::vector<std::pair<double, double>>>> curves;
  std::set<long> s_values;
  for (std::size_t k = 0; k < curv.rows.size(); ++k) {
    const auto& row = curv.rows[k];
    const std::string ctx = curves_file.filename().string() + ":" + std::to_string(curv.line_numbers[k]);
    const long s = detail::parse_long(row[1], ctx);
    s_values.insert(s);
    curves[row[0]][s].emplace_back(detail::parse_double(row[2], ctx), detail::parse_double(row[3], ctx));
  }

  DegradationDataset ds;
  ds.P = P;
  ds.S = static_cast<Index>(s_values.size());

  std::vector<double> grid;
  bool grid_set = false;
  for (auto& [uid, obs] : series) {
    UnitRecord u;
    u.unit_id = uid;
    std::stable_sort(obs.begin(), obs.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    u.times.resize(static_cast<Index>(obs.size()));
    u.responses.resize(static_cast<Index>(obs.size()));
    for (std::size_t j = 0; j < obs.size(); ++j) {
      if (j > 0 && !(obs[j].first > obs[j - 1].first))
        throw ValidationError("unit " + uid + ": non-increasing times");
      u.times(static_cast<Index>(j)) = obs[j].first;
      u.responses(static_cast<Index>(j)) = obs[j].second;
    }
    auto sit = scalars.find(uid);
    if (sit == scalars.end()) throw ValidationError("missing covariates for unit " + uid);
    u.scalars = sit->second;

    if (ds.S > 0) {
      auto cit = curves.find(uid);
      if (cit == curves.end()) throw ValidationError("missing functional covariates for unit " + uid);
      for (long s : s_values) {
        auto it = cit->second.find(s);
        if (it == cit->second.end())
          throw ValidationError("unit " + uid + ": missing curve s=" + std::to_string(s));
        auto pts = it->second;
        std::stable_sort(pts.begin(), pts.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<double> r(pts.size());
        Eigen::VectorXd z(static_cast<Index>(pts.size()));
        for (std::size_t g = 0; g < pts.size(); ++g) {
          r[g] = pts[g].first;
          z(static_cast<Index>(g)) = pts[g].second;
        }
        if (!grid_set) {
          grid = r;
          grid_set = true;
        } else if (r != grid) {
          throw ValidationError("unit " + uid + ": ragged functional grid");
        }
        u.curves.push_back(std::move(z));
      }
    }
    ds.units.push_back(std::move(u));
  }
  for (const auto& [uid, x] : scalars)
    if (!series.count(uid)) throw ValidationError("missing responses for unit " + uid);
  for (const auto& [uid, c] : curves)
    if (!series.count(uid)) throw ValidationError("missing responses for unit " + uid);

  ds.r_grid = Eigen::Map<const Eigen::VectorXd>(grid.data(), static_cast<Index>(grid.size()));
  ds.validate();
  return ds;
}

DegradationDataset load_dataset_dir(const std::filesystem::path& dir) {
  return load_dataset(dir / "responses.csv", dir / "scalars.csv", dir / "curves.csv");
}

void save_dataset(const DegradationDataset& ds, const std::filesystem::path& responses_file,
                  const std::filesystem::path& scalars_file,
                  const std::filesystem::path& curves_file) {
  std::ofstream resp(responses_file, std::ios::binary);
  std::ofstream scal(scalars_file, std::ios::binary);
  std::ofstream curv(curves_file, std::ios::binary);
  if (!resp || !scal || !curv) throw ValidationError("cannot write dataset files");

  resp << "unit_id,time,y\n";
  scal << "unit_id";
  for (Index p = 0; p < ds.P; ++p) scal << ",x" << (p + 1);
  scal << '\n';
  curv << "unit_id,s,r,z\n";
  for (const auto& u : ds.units) {
    for (Index j = 0; j < u.times.size(); ++j)
      resp << u.unit_id << ',' << format_double(u.times(j)) << ',' << format_double(u.responses(j)) << '\n';
    scal << u.unit_id;
    for (Index p = 0; p < u.scalars.size(); ++p) scal << ',' << format_double(u.scalars(p));
    scal << '\n';
    for (std::size_t s = 0; s < u.curves.size(); ++s)
      for (Index g = 0; g < ds.r_grid.size(); ++g)
        curv << u.unit_id << ',' << (s + 1) << ',' << format_double(ds.r_grid(g)) << ','
             << format_double(u.curves[s](g)) << '\n';
  }
}

void save_dataset_dir(const DegradationDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_dataset(ds, dir / "responses.csv", dir / "scalars.csv", dir / "curves.csv");
}

}  // namespace degrade

#include "degrade/descriptors.hpp"

#include "csv.hpp"
#include "degrade/datamodel.hpp"
#include "degrade/errors.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <numbers>
#include <sstream>

namespace degrade {

using Eigen::Index;

void MicrostructureImage::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("image dimensions must be positive");
  if (static_cast<Index>(intensities.size()) != width * height)
    throw ValidationError("image grid length does not match width x height");
  if (phase_mask && static_cast<Index>(phase_mask->size()) != width * height)
    throw ValidationError("phase mask dimensions do not match the image");
}

double MicrostructureImage::phase_fraction() const {
  if (!phase_mask) throw ValidationError("image has no phase mask");
  std::size_t n = 0;
  for (bool b : *phase_mask) n += b ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(phase_mask->size());
}

void ParticleSet::validate() const {
  if (!(window_width > 0.0) || !(window_height > 0.0)) throw ValidationError("particle window must be positive");
  for (const auto& p : coordinates)
    if (!(p.x() >= 0.0 && p.x() <= window_width && p.y() >= 0.0 && p.y() <= window_height))
      throw ValidationError("particle outside the window");
}

MicrostructureImage binarize_image(MicrostructureImage img, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
  img.validate();
  std::vector<bool> mask(img.intensities.size());
  for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = img.intensities[k] >= threshold;
  img.phase_mask = std::move(mask);
  return img;
}

namespace {

// Nearest integer to sqrt(n); n is never at a half-integer radius squared.
Index nearest_radius(Index n) {
  return static_cast<Index>(std::floor(std::sqrt(static_cast<double>(n)) + 0.5));
}

}  // namespace

DescriptorCurve compute_tpc(const MicrostructureImage& img, Index r_max, bool periodic) {
  img.validate();
  if (!img.phase_mask) throw ValidationError("compute_tpc: missing phase mask");
  if (r_max < 0 || 2 * r_max >= std::min(img.width, img.height))
    throw ValidationError("compute_tpc: r_max must be below half the shorter image side");

  const Index W = img.width;
  const Index H = img.height;
  std::vector<std::uint8_t> m(img.phase_mask->size());
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = (*img.phase_mask)[k] ? 1 : 0;

  std::vector<std::int64_t> hits(static_cast<std::size_t>(r_max + 1), 0);
  std::vector<std::int64_t> pairs(static_cast<std::size_t>(r_max + 1), 0);

  for (Index dy = -r_max; dy <= r_max; ++dy) {
    for (Index dx = -r_max; dx <= r_max; ++dx) {
      const Index r = nearest_radius(dx * dx + dy * dy);
      if (r > r_max) continue;
      std::int64_t sum = 0;
      std::int64_t count = 0;
      if (periodic) {
        for (Index y = 0; y < H; ++y) {
          const std::uint8_t* row = &m[static_cast<std::size_t>(y * W)];
          const std::uint8_t* shifted = &m[static_cast<std::size_t>(((y + dy) % H + H) % H * W)];
          for (Index x = 0; x < W; ++x) sum += row[x] & shifted[((x + dx) % W + W) % W];
        }
        count = W * H;
      } else {
        const Index x0 = std::max<Index>(0, -dx), x1 = std::min(W, W - dx);
        const Index y0 = std::max<Index>(0, -dy), y1 = std::min(H, H - dy);
        for (Index y = y0; y < y1; ++y) {
          const std::uint8_t* row = &m[static_cast<std::size_t>(y * W)];
          const std::uint8_t* shifted = &m[static_cast<std::size_t>((y + dy) * W + dx)];
          for (Index x = x0; x < x1; ++x) sum += row[x] & shifted[x];
        }
        count = (x1 - x0) * (y1 - y0);
      }
      hits[static_cast<std::size_t>(r)] += sum;
      pairs[static_cast<std::size_t>(r)] += count;
    }
  }

  DescriptorCurve curve;
  curve.kind = DescriptorKind::tpc;
  curve.r_grid.resize(r_max + 1);
  curve.values.resize(r_max + 1);
  for (Index r = 0; r <= r_max; ++r) {
    curve.r_grid(r) = static_cast<double>(r);
    curve.values(r) = static_cast<double>(hits[static_cast<std::size_t>(r)]) /
                      static_cast<double>(pairs[static_cast<std::size_t>(r)]);
  }
  return curve;
}

ParticleSet extract_particles(const MicrostructureImage& img) {
  img.validate();
  if (!img.phase_mask) throw ValidationError("extract_particles: missing phase mask");
  const Index W = img.width;
  const Index H = img.height;
  const auto& mask = *img.phase_mask;
  std::vector<bool> visited(mask.size(), false);

  ParticleSet ps;
  ps.window_width = static_cast<double>(W);
  ps.window_height = static_cast<double>(H);

  std::deque<Index> queue;
  for (Index start = 0; start < W * H; ++start) {
    if (!mask[static_cast<std::size_t>(start)] || visited[static_cast<std::size_t>(start)]) continue;
    visited[static_cast<std::size_t>(start)] = true;
    queue.push_back(start);
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    while (!queue.empty()) {
      const Index k = queue.front();
      queue.pop_front();
      const Index x = k % W, y = k / W;
      sx += static_cast<double>(x);
      sy += static_cast<double>(y);
      ++n;
      const Index nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& p : nbr) {
        if (p[0] < 0 || p[0] >= W || p[1] < 0 || p[1] >= H) continue;
        const auto idx = static_cast<std::size_t>(p[1] * W + p[0]);
        if (mask[idx] && !visited[idx]) {
          visited[idx] = true;
          queue.push_back(static_cast<Index>(idx));
        }
      }
    }
    ps.coordinates.emplace_back(sx / static_cast<double>(n), sy / static_cast<double>(n));
  }
  return ps;
}

DescriptorCurve compute_rdf(const ParticleSet& ps, double r_max, double dr) {
  ps.validate();
  if (!(dr > 0.0)) throw ValidationError("compute_rdf: dr must be positive");
  if (!(r_max > dr)) throw ValidationError("compute_rdf: r_max must exceed dr");
  if (r_max > 0.5 * std::min(ps.window_width, ps.window_height))
    throw ValidationError("compute_rdf: r_max larger than half the window's shorter side");

  const auto nbins = static_cast<Index>(std::ceil(r_max / dr - 1e-9));
  DescriptorCurve curve;
  curve.kind = DescriptorKind::rdf;
  curve.r_grid.resize(nbins);
  for (Index b = 0; b < nbins; ++b) curve.r_grid(b) = static_cast<double>(b) * dr;
  curve.values = Eigen::VectorXd::Zero(nbins);

  const auto M = static_cast<Index>(ps.coordinates.size());
  std::vector<Index> interior;
  for (Index i = 0; i < M; ++i) {
    const auto& p = ps.coordinates[static_cast<std::size_t>(i)];
    if (p.x() >= r_max && p.x() <= ps.window_width - r_max && p.y() >= r_max &&
        p.y() <= ps.window_height - r_max)
      interior.push_back(i);
  }
  if (M <= 1 || interior.empty()) {
    curve.degenerate = true;
    return curve;
  }

  std::vector<std::int64_t> counts(static_cast<std::size_t>(nbins), 0);
  for (Index i : interior) {
    const auto& pi = ps.coordinates[static_cast<std::size_t>(i)];
    for (Index j = 0; j < M; ++j) {
      if (j == i) continue;
      const double d = (ps.coordinates[static_cast<std::size_t>(j)] - pi).norm();
      const auto b = static_cast<Index>(std::floor(d / dr));
      if (b < nbins) ++counts[static_cast<std::size_t>(b)];
    }
  }

  const double kappa = static_cast<double>(M) / ps.area();
  const auto m_int = static_cast<double>(interior.size());
  for (Index b = 0; b < nbins; ++b) {
    const double annulus = std::numbers::pi * dr * dr * static_cast<double>(2 * b + 1);
    curve.values(b) = static_cast<double>(counts[static_cast<std::size_t>(b)]) / (m_int * kappa * annulus);
  }
  return curve;
}

namespace {

std::string next_pgm_token(std::istream& in) {
  std::string tok;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  if (tok.empty()) throw ValidationError("truncated PGM header");
  return tok;
}

}  // namespace

MicrostructureImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  const std::string magic = next_pgm_token(in);
  if (magic != "P2" && magic != "P5") throw ValidationError(path.string() + ": not a P2/P5 PGM file");
  MicrostructureImage img;
  const std::string ctx = path.filename().string();
  img.width = detail::parse_long(next_pgm_token(in), ctx);
  img.height = detail::parse_long(next_pgm_token(in), ctx);
  const long maxval = detail::parse_long(next_pgm_token(in), ctx);
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 65535)
    throw ValidationError(ctx + ": bad PGM header");
  const auto n = static_cast<std::size_t>(img.width * img.height);
  img.intensities.resize(n);
  const double scale = 1.0 / static_cast<double>(maxval);
  if (magic == "P2") {
    for (std::size_t k = 0; k < n; ++k) {
      const long v = detail::parse_long(next_pgm_token(in), ctx);
      if (v < 0 || v > maxval) throw ValidationError(ctx + ": pixel out of range");
      img.intensities[k] = static_cast<double>(v) * scale;
    }
  } else {
    const int bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(n * static_cast<std::size_t>(bytes));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw ValidationError(ctx + ": truncated PGM data");
    for (std::size_t k = 0; k < n; ++k) {
      const unsigned v = bytes == 1 ? raw[k] : (unsigned{raw[2 * k]} << 8) | raw[2 * k + 1];
      if (v > static_cast<unsigned>(maxval)) throw ValidationError(ctx + ": pixel out of range");
      img.intensities[k] = static_cast<double>(v) * scale;
    }
  }
  return img;
}

void write_pgm(const MicrostructureImage& img, const std::filesystem::path& path) {
  img.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  for (double v : img.intensities) {
    const double c = std::clamp(v, 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
}

ParticleSet read_particles_csv(const std::filesystem::path& path) {
  std::vector<std::string> comments;
  const auto table = detail::read_csv(path, &comments);
  const std::string ctx = path.filename().string();
  ParticleSet ps;
  bool have_window = false;
  for (const auto& c : comments) {
    std::istringstream ss(c.substr(1));
    std::string key;
    ss >> key;
    if (key == "window") {
      if (!(ss >> ps.window_width >> ps.window_height)) throw ValidationError(ctx + ": bad window line");
      have_window = true;
    }
  }
  if (!have_window) throw ValidationError(ctx + ": missing '# window w h' line");
  if (table.header != std::vector<std::string>{"x", "y"}) throw ValidationError(ctx + ": header must be x,y");
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const std::string where = ctx + ":" + std::to_string(table.line_numbers[k]);
    ps.coordinates.emplace_back(detail::parse_double(table.rows[k][0], where),
                                detail::parse_double(table.rows[k][1], where));
  }
  ps.validate();
  return ps;
}

void write_particles_csv(const ParticleSet& ps, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "# window " << format_double(ps.window_width) << ' ' << format_double(ps.window_height) << "\nx,y\n";
  for (const auto& p : ps.coordinates) out << format_double(p.x()) << ',' << format_double(p.y()) << '\n';
}

void write_descriptor_csv(const DescriptorCurve& curve, const std::string& unit_id, int s,
                          std::ostream& out, bool with_header) {
  if (with_header) out << "unit_id,s,r,z\n";
  for (Index g = 0; g < curve.r_grid.size(); ++g)
    out << unit_id << ',' << s << ',' << format_double(curve.r_grid(g)) << ','
        << format_double(curve.values(g)) << '\n';
}

}  // namespace degrade

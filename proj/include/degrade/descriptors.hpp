#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace degrade {

/// Grayscale micrograph, row-major, intensities in [0, 1].
struct MicrostructureImage {
  Eigen::Index width = 0;
  Eigen::Index height = 0;
  std::vector<double> intensities;
  std::optional<std::vector<bool>> phase_mask;  // true marks the phase of interest

  double at(Eigen::Index x, Eigen::Index y) const { return intensities[static_cast<std::size_t>(y * width + x)]; }
  void validate() const;
  double phase_fraction() const;
};

struct ParticleSet {
  std::vector<Eigen::Vector2d> coordinates;
  double window_width = 0.0;
  double window_height = 0.0;

  double area() const { return window_width * window_height; }
  void validate() const;
};

enum class DescriptorKind { tpc, rdf };

struct DescriptorCurve {
  DescriptorKind kind = DescriptorKind::tpc;
  Eigen::VectorXd r_grid;
  Eigen::VectorXd values;
  bool degenerate = false;  // RDF with no usable reference particle
};

MicrostructureImage binarize_image(MicrostructureImage img, double threshold = 0.5);

// Isotropic two-point correlation of the phase mask. Displacements are bucketed
// by the nearest integer radius; counts are accumulated exactly in integers.
DescriptorCurve compute_tpc(const MicrostructureImage& img, Eigen::Index r_max, bool periodic);

// 4-connected components of the phase mask, one particle per component at its
// pixel centroid (x = column, y = row).
ParticleSet extract_particles(const MicrostructureImage& img);

// Guard-region radial distribution estimator with bins [b dr, (b + 1) dr).
DescriptorCurve compute_rdf(const ParticleSet& ps, double r_max, double dr);

MicrostructureImage read_pgm(const std::filesystem::path& path);
void write_pgm(const MicrostructureImage& img, const std::filesystem::path& path);

// CSV `x,y` preceded by a `# window w h` line.
ParticleSet read_particles_csv(const std::filesystem::path& path);
void write_particles_csv(const ParticleSet& ps, const std::filesystem::path& path);

// Appends rows `unit_id,s,r,z`; writes the header when `with_header` is set.
void write_descriptor_csv(const DescriptorCurve& curve, const std::string& unit_id, int s,
                          std::ostream& out, bool with_header);

}  // namespace degrade

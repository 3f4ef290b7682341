#pragma once
// Brute-force reference implementations used only by the tests. None of them
// calls into the library's numerical code.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// O(n^2) enumeration over ordered pixel pairs; returns hits/pairs per integer radius.
inline VectorXd tpc_pairs(const std::vector<bool>& mask, Index W, Index H, Index r_max, bool periodic) {
  std::vector<long long> hits(static_cast<std::size_t>(r_max + 1), 0), pairs(static_cast<std::size_t>(r_max + 1), 0);
  for (Index y1 = 0; y1 < H; ++y1)
    for (Index x1 = 0; x1 < W; ++x1)
      for (Index y2 = 0; y2 < H; ++y2)
        for (Index x2 = 0; x2 < W; ++x2) {
          Index dx = x2 - x1, dy = y2 - y1;
          if (periodic) {
            // Every displacement representative within the r_max box counts once.
            for (Index ox = -1; ox <= 1; ++ox)
              for (Index oy = -1; oy <= 1; ++oy) {
                const Index ddx = dx + ox * W, ddy = dy + oy * H;
                if (std::abs(ddx) > r_max || std::abs(ddy) > r_max) continue;
                const double d = std::sqrt(static_cast<double>(ddx * ddx + ddy * ddy));
                const auto r = static_cast<Index>(std::llround(d));
                if (r > r_max) continue;
                pairs[static_cast<std::size_t>(r)] += 1;
                hits[static_cast<std::size_t>(r)] +=
                    (mask[static_cast<std::size_t>(y1 * W + x1)] && mask[static_cast<std::size_t>(y2 * W + x2)]) ? 1 : 0;
              }
            continue;
          }
          const double d = std::sqrt(static_cast<double>(dx * dx + dy * dy));
          const auto r = static_cast<Index>(std::llround(d));
          if (r > r_max) continue;
          pairs[static_cast<std::size_t>(r)] += 1;
          hits[static_cast<std::size_t>(r)] +=
              (mask[static_cast<std::size_t>(y1 * W + x1)] && mask[static_cast<std::size_t>(y2 * W + x2)]) ? 1 : 0;
        }
  VectorXd v(r_max + 1);
  for (Index r = 0; r <= r_max; ++r)
    v(r) = static_cast<double>(hits[static_cast<std::size_t>(r)]) / static_cast<double>(pairs[static_cast<std::size_t>(r)]);
  return v;
}

// Recursive 4-connected flood fill; returns a component label per pixel (-1 for background).
inline std::vector<int> flood_fill_labels(const std::vector<bool>& mask, Index W, Index H, int* count) {
  std::vector<int> label(mask.size(), -1);
  int next = 0;
  std::function<void(Index, Index)> fill = [&](Index x, Index y) {
    if (x < 0 || y < 0 || x >= W || y >= H) return;
    const auto k = static_cast<std::size_t>(y * W + x);
    if (!mask[k] || label[k] >= 0) return;
    label[k] = next;
    fill(x + 1, y);
    fill(x - 1, y);
    fill(x, y + 1);
    fill(x, y - 1);
  };
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < W; ++x)
      if (mask[static_cast<std::size_t>(y * W + x)] && label[static_cast<std::size_t>(y * W + x)] < 0) {
        fill(x, y);
        ++next;
      }
  *count = next;
  return label;
}

// gamma | y from the joint Gaussian of (gamma, y) by the Schur complement.
struct Conditional {
  VectorXd mu;
  MatrixXd V;
};
inline Conditional condition_joint(const MatrixXd& omega, const MatrixXd& lambda, const VectorXd& y,
                                   const VectorXd& zeta, const MatrixXd& sigma_gamma, double sigma_eps2) {
  const Index m = y.size();
  const MatrixXd S_yy = lambda * sigma_gamma * lambda.transpose() + sigma_eps2 * MatrixXd::Identity(m, m);
  const MatrixXd S_gy = sigma_gamma * lambda.transpose();
  const MatrixXd S_yy_inv = S_yy.fullPivLu().inverse();
  return {S_gy * S_yy_inv * (y - omega * zeta), sigma_gamma - S_gy * S_yy_inv * S_gy.transpose()};
}

// Golden-section maximization of a unimodal function on [a, b].
inline long double golden_max(const std::function<long double(long double)>& f, long double a, long double b,
                              int iters = 400) {
  const long double g = (std::sqrt(5.0L) - 1.0L) / 2.0L;
  long double c = b - g * (b - a), d = a + g * (b - a);
  long double fc = f(c), fd = f(d);
  for (int k = 0; k < iters && (b - a) > 1e-30L; ++k) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return (a + b) / 2.0L;
}

// Central-difference gradient with a step scaled to each coordinate.
inline VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double rel = 1e-6) {
  VectorXd g(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    const double h = rel * std::max(1.0, std::abs(x(k)));
    VectorXd a = x, b = x;
    a(k) += h;
    b(k) -= h;
    g(k) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

// Log density of N(mean, cov) through an explicit LU determinant and inverse.
inline double gaussian_logpdf(const VectorXd& y, const VectorXd& mean, const MatrixXd& cov) {
  const Eigen::FullPivLU<MatrixXd> lu(cov);
  const VectorXd r = y - mean;
  return -0.5 * (static_cast<double>(y.size()) * std::log(2.0 * 3.14159265358979323846) +
                 std::log(std::abs(lu.determinant())) + r.dot(lu.solve(r)));
}

// Trapezoid rule evaluated in long double with an explicit interval loop.
inline double trapezoid(const VectorXd& grid, const VectorXd& f) {
  long double s = 0.0L;
  for (Index g = 0; g + 1 < grid.size(); ++g)
    s += 0.5L * (static_cast<long double>(grid(g + 1)) - grid(g)) * (static_cast<long double>(f(g)) + f(g + 1));
  return static_cast<double>(s);
}

inline MatrixXd random_matrix(std::mt19937_64& gen, Index r, Index c, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = n(gen);
  return m;
}

inline MatrixXd random_spd(std::mt19937_64& gen, Index q, double scale = 1.0) {
  const MatrixXd a = random_matrix(gen, q, q);
  return scale * (a * a.transpose() / static_cast<double>(q) + 0.2 * MatrixXd::Identity(q, q));
}

}  // namespace oracle

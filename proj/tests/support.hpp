#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "lsdnn/field.hpp"
#include "lsdnn/optics.hpp"

namespace testing {

using lsdnn::Complex;
using lsdnn::ComplexField;
using lsdnn::Grid2D;
using lsdnn::RealField;

// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("lsdnn_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& s) const { return path / s; }
};

inline RealField random_real(const Grid2D& g, unsigned seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  RealField f(g);
  for (double& v : f.values) v = u(rng);
  return f;
}

inline ComplexField random_complex(const Grid2D& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexField f(g);
  for (Complex& v : f.values) v = Complex(n(rng), n(rng));
  return f;
}

// Quadratic-time DFT with the library's layout: spatial index from 0,
// spectral index centered on n/2.
inline ComplexField naive_dft(const ComplexField& x) {
  const std::size_t nx = x.nx(), ny = x.ny();
  ComplexField out(x.grid);
  for (std::size_t cy = 0; cy < ny; ++cy)
    for (std::size_t cx = 0; cx < nx; ++cx) {
      const double ky = static_cast<double>(cy) - static_cast<double>(ny / 2);
      const double kx = static_cast<double>(cx) - static_cast<double>(nx / 2);
      Complex s = 0.0;
      for (std::size_t iy = 0; iy < ny; ++iy)
        for (std::size_t ix = 0; ix < nx; ++ix) {
          const double ang = -2.0 * std::numbers::pi *
                             (ky * static_cast<double>(iy) / static_cast<double>(ny) +
                              kx * static_cast<double>(ix) / static_cast<double>(nx));
          s += x(iy, ix) * Complex(std::cos(ang), std::sin(ang));
        }
      out(cy, cx) = s;
    }
  return out;
}

inline double max_abs_diff(const ComplexField& a, const ComplexField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

inline double max_abs_diff(const RealField& a, const RealField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.values[i] - b.values[i]));
  return m;
}

inline double energy(const ComplexField& f) {
  double s = 0.0;
  for (const Complex& v : f.values) s += std::norm(v);
  return s;
}

// Sum of narrow Gaussian bumps, amplitude <= amp; smooth enough for GS to converge.
inline RealField smooth_phantom(const Grid2D& g, unsigned seed, double sigma_px = 4.0, double amp = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.25, 0.75), a(0.3, 1.0);
  RealField f(g);
  for (int b = 0; b < 4; ++b) {
    const double cx = pos(rng) * static_cast<double>(g.nx), cy = pos(rng) * static_cast<double>(g.ny);
    const double h = a(rng) * amp;
    for (std::size_t iy = 0; iy < g.ny; ++iy)
      for (std::size_t ix = 0; ix < g.nx; ++ix) {
        const double dx = static_cast<double>(ix) - cx, dy = static_cast<double>(iy) - cy;
        f(iy, ix) += h * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_px * sigma_px));
      }
  }
  double mx = 0.0;
  for (double v : f.values) mx = std::max(mx, v);
  for (double& v : f.values) v *= amp / mx;
  return f;
}

// Desk-scale optics: 64 x 64 at 65 um, HeNe, 0.4 m.
inline lsdnn::OpticalConfig desk_optics(std::size_t n = 64) {
  lsdnn::OpticalConfig c;
  c.grid = Grid2D::square(n, 65e-6);
  return c;
}

}  // namespace testing

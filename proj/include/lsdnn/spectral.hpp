#pragma once

#include <vector>

#include "lsdnn/field.hpp"

namespace lsdnn {

// High-pass power-law filter C = (nu_x^2 + nu_y^2)^q.
struct PowerLawFilter {
  double q = 0.5;
  Grid2D grid;
};

// Transfer normalized so that max C = 1. DC is 0 for q > 0 and 1 for q = 0.
RealField filter_transfer(const PowerLawFilter& filter);

// f_p = Re idft2(dft2(f) * C).
RealField apply_filter(const RealField& f, const PowerLawFilter& filter);
// Same with an arbitrary real transfer on the centered grid.
RealField apply_transfer(const RealField& f, const RealField& transfer);

// Mean squared spectral magnitude over the images, DC-centered.
RealField psd2d(const std::vector<RealField>& images);

// Main diagonal from DC toward the corner, nx/2 samples, normalized to max 1.
std::vector<double> psd_diagonal(const RealField& psd);

// Horizontal cut from DC toward +nu_x, nx/2 samples, unnormalized.
std::vector<double> psd_horizontal(const RealField& psd);

struct RadialProfile {
  std::vector<double> radius;  // bin center in frequency-index units
  std::vector<double> power;   // mean PSD in the annulus
};

// One-pixel-wide annuli around DC (bin r holds radii in [r - 0.5, r + 0.5)).
RadialProfile radial_profile(const RealField& psd);

// Log-log least-squares slope over radii in [n/16, n/4].
double radial_slope(const RealField& psd);

}  // namespace lsdnn

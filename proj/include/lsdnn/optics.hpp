#pragma once

#include "lsdnn/field.hpp"

namespace lsdnn {

inline constexpr double kHeNeWavelength = 632.8e-9;  // m
inline constexpr double kDefaultDefocus = 0.4;       // m
inline constexpr double kSlmPitch = 36e-6;           // m
inline constexpr std::size_t kSlmPixels = 256;

struct OpticalConfig {
  double wavelength = kHeNeWavelength;
  double z = kDefaultDefocus;
  Grid2D grid = Grid2D::square(kSlmPixels, kSlmPitch);
  // Power-of-two zero-padding factor applied inside propagate (1 = off).
  std::size_t pad_factor = 1;

  void validate() const;
  // The discrete chirp is adequately sampled when z <= nx * dx^2 / lambda.
  bool chirp_sampled() const;
};

// H(nu) = exp(i 2 pi z / lambda) exp(-i pi lambda z |nu|^2) on the centered grid.
// Any sign of z is accepted here; OpticalConfig enforces z >= 0.
ComplexField fresnel_transfer(const Grid2D& grid, double wavelength, double z);
ComplexField fresnel_transfer(const OpticalConfig& config);

// Spectral Fresnel propagation by config.z. Warns if the chirp is undersampled.
ComplexField propagate(const ComplexField& field, const OpticalConfig& config);
// Propagation by -config.z, the exact inverse of propagate when unpadded.
ComplexField back_propagate(const ComplexField& field, const OpticalConfig& config);
// Propagation by an arbitrary signed distance, no padding and no warning.
ComplexField propagate_by(const ComplexField& field, double wavelength, double z);

// Noiseless raw image g0 = |F_z exp(i phase)|^2 under unit plane-wave illumination.
RealField forward_intensity(const RealField& phase, const OpticalConfig& config);

ComplexField phase_to_field(const RealField& phase);

}  // namespace lsdnn

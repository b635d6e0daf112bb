#include "lsdnn/optics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace lsdnn {

void OpticalConfig::validate() const {
  grid.validate();
  if (!(wavelength > 0.0) || !std::isfinite(wavelength))
    throw UsageError("wavelength must be positive");
  if (!(z >= 0.0) || !std::isfinite(z)) throw UsageError("defocus z must be >= 0");
  if (pad_factor == 0 || (pad_factor & (pad_factor - 1)) != 0)
    throw UsageError("pad factor must be a power of two");
}

bool OpticalConfig::chirp_sampled() const {
  const double n = static_cast<double>(grid.nx * pad_factor);
  return z <= n * grid.dx * grid.dx / wavelength;
}

ComplexField fresnel_transfer(const Grid2D& grid, double wavelength, double z) {
  const auto [nu_x, nu_y] = frequency_axes(grid);
  ComplexField h(grid);
  const double pi = std::numbers::pi;
  const Complex global = std::polar(1.0, 2.0 * pi * z / wavelength);
  for (std::size_t iy = 0; iy < grid.ny; ++iy)
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const double nu2 = nu_x[ix] * nu_x[ix] + nu_y[iy] * nu_y[iy];
      h(iy, ix) = global * std::polar(1.0, -pi * wavelength * z * nu2);
    }
  return h;
}

ComplexField fresnel_transfer(const OpticalConfig& config) {
  config.validate();
  return fresnel_transfer(config.grid, config.wavelength, config.z);
}

ComplexField propagate_by(const ComplexField& field, double wavelength, double z) {
  ComplexField spectrum = dft2(field);
  const ComplexField h = fresnel_transfer(field.grid, wavelength, z);
  for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum.values[i] *= h.values[i];
  return idft2(spectrum);
}

namespace {

ComplexField propagate_signed(const ComplexField& field, const OpticalConfig& config,
                              double z) {
  config.validate();
  require_same_grid(field.grid, config.grid, "propagate");
  if (!config.chirp_sampled()) {
    std::ostringstream os;
    os << "Fresnel chirp undersampled: z=" << config.z << " m exceeds nx*dx^2/lambda="
       << static_cast<double>(config.grid.nx * config.pad_factor) * config.grid.dx *
              config.grid.dx / config.wavelength
       << " m";
    warn(os.str());
  }
  if (config.pad_factor == 1) return propagate_by(field, config.wavelength, z);

  // Embed in the center of a larger zero field, propagate, crop back.
  Grid2D big = config.grid;
  big.nx *= config.pad_factor;
  big.ny *= config.pad_factor;
  const std::size_t oy = (big.ny - config.grid.ny) / 2;
  const std::size_t ox = (big.nx - config.grid.nx) / 2;
  ComplexField padded(big);
  for (std::size_t iy = 0; iy < field.ny(); ++iy)
    for (std::size_t ix = 0; ix < field.nx(); ++ix) padded(iy + oy, ix + ox) = field(iy, ix);
  const ComplexField out = propagate_by(padded, config.wavelength, z);
  ComplexField cropped(config.grid);
  for (std::size_t iy = 0; iy < field.ny(); ++iy)
    for (std::size_t ix = 0; ix < field.nx(); ++ix) cropped(iy, ix) = out(iy + oy, ix + ox);
  return cropped;
}

}  // namespace

ComplexField propagate(const ComplexField& field, const OpticalConfig& config) {
  return propagate_signed(field, config, config.z);
}

ComplexField back_propagate(const ComplexField& field, const OpticalConfig& config) {
  return propagate_signed(field, config, -config.z);
}

ComplexField phase_to_field(const RealField& phase) {
  require_finite(phase.values, "phase");
  ComplexField out(phase.grid);
  for (std::size_t i = 0; i < phase.size(); ++i) out.values[i] = std::polar(1.0, phase.values[i]);
  return out;
}

RealField forward_intensity(const RealField& phase, const OpticalConfig& config) {
  require_same_grid(phase.grid, config.grid, "forward_intensity");
  return abs_squared(propagate(phase_to_field(phase), config));
}

}  // namespace lsdnn

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "lsdnn/error.hpp"

namespace lsdnn {

using Complex = std::complex<double>;

// Sampling grid shared by object, detector and spectral planes.
struct Grid2D {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double dx = 0.0;  // meters
  double dy = 0.0;  // meters

  static Grid2D square(std::size_t n, double pitch) { return {n, n, pitch, pitch}; }

  std::size_t size() const { return nx * ny; }
  // Throws DimensionError for odd/too-small counts or nonpositive pitch.
  void validate() const;
  // Same pixel counts and pitch (bitwise).
  bool operator==(const Grid2D&) const = default;
};

// Row-major raster of values on a grid. values[iy * nx + ix].
template <class T>
struct Field {
  Grid2D grid;
  std::vector<T> values;

  Field() = default;
  explicit Field(const Grid2D& g, T fill = T{}) : grid(g), values(g.size(), fill) {}
  Field(const Grid2D& g, std::vector<T> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size())
      throw DimensionError("field value count does not match grid");
  }

  std::size_t nx() const { return grid.nx; }
  std::size_t ny() const { return grid.ny; }
  std::size_t size() const { return values.size(); }

  T& operator()(std::size_t iy, std::size_t ix) { return values[iy * grid.nx + ix]; }
  const T& operator()(std::size_t iy, std::size_t ix) const {
    return values[iy * grid.nx + ix];
  }

  std::span<T> span() { return values; }
  std::span<const T> span() const { return values; }
};

using RealField = Field<double>;
using ComplexField = Field<Complex>;

// Forward transform, negative exponent, unscaled, DC moved to (ny/2, nx/2).
ComplexField dft2(const ComplexField& field);
// Inverse of dft2 (1/(nx*ny) scaling); input is DC-centered.
ComplexField idft2(const ComplexField& spectrum);

ComplexField dft2(const RealField& field);

// nu[k] = (k - n/2) / (n * d), cycles per meter, matching the centered layout.
std::pair<std::vector<double>, std::vector<double>> frequency_axes(const Grid2D& grid);

ComplexField to_complex(const RealField& field);
RealField real_part(const ComplexField& field);
RealField abs_squared(const ComplexField& field);

// Throws DimensionError when the pixel counts differ; pitch is not compared.
void require_same_grid(const Grid2D& a, const Grid2D& b, const char* what);
// Throws DegenerateError on NaN/Inf.
void require_finite(std::span<const double> values, const char* what);

double mean(std::span<const double> values);
double variance(std::span<const double> values);  // population

}  // namespace lsdnn

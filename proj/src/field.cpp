#include "lsdnn/field.hpp"

#include <fftw3.h>

#include <atomic>
#include <cmath>
#include <cstring>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <mutex>
#include <sstream>
#include <tuple>

namespace lsdnn {

namespace {

std::atomic<bool> g_warnings{true};

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!data) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

// Plans are created once per (ny, nx, sign) and executed on fresh aligned
// buffers through the new-array interface, which is thread-safe.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t ny, std::size_t nx, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_tuple(ny, nx, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    FftwBuffer in(ny * nx), out(ny * nx);
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(ny), static_cast<int>(nx),
                                      in.data, out.data, sign, FFTW_ESTIMATE);
    if (!plan) throw std::runtime_error("fftw plan creation failed");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

void require_even(const Grid2D& grid) {
  if (grid.nx % 2 != 0 || grid.ny % 2 != 0 || grid.nx < 2 || grid.ny < 2) {
    std::ostringstream os;
    os << "transform requires even dimensions, got " << grid.ny << "x" << grid.nx;
    throw DimensionError(os.str());
  }
}

}  // namespace

// Each distinct message is printed once per process.
void warn(const std::string& message) {
  if (!g_warnings.load()) return;
  static std::mutex mu;
  static std::set<std::string> seen;
  std::lock_guard<std::mutex> lock(mu);
  if (seen.insert(message).second) std::cerr << "warning: " << message << '\n';
}
void set_warnings_enabled(bool enabled) { g_warnings.store(enabled); }
bool warnings_enabled() { return g_warnings.load(); }

void Grid2D::validate() const {
  require_even(*this);
  if (!(dx > 0.0) || !(dy > 0.0) || !std::isfinite(dx) || !std::isfinite(dy))
    throw DimensionError("grid pitch must be positive and finite");
}

ComplexField dft2(const ComplexField& field) {
  const Grid2D& g = field.grid;
  require_even(g);
  const std::size_t nx = g.nx, ny = g.ny;
  FftwBuffer in(ny * nx), out(ny * nx);
  std::memcpy(in.data, field.values.data(), sizeof(fftw_complex) * ny * nx);
  fftw_execute_dft(PlanCache::instance().get(ny, nx, FFTW_FORWARD), in.data, out.data);

  ComplexField spectrum(g);
  for (std::size_t cy = 0; cy < ny; ++cy) {
    const std::size_t ky = (cy + ny / 2) % ny;
    for (std::size_t cx = 0; cx < nx; ++cx) {
      const std::size_t kx = (cx + nx / 2) % nx;
      const fftw_complex& v = out.data[ky * nx + kx];
      spectrum(cy, cx) = Complex(v[0], v[1]);
    }
  }
  return spectrum;
}

ComplexField idft2(const ComplexField& spectrum) {
  const Grid2D& g = spectrum.grid;
  require_even(g);
  const std::size_t nx = g.nx, ny = g.ny;
  FftwBuffer in(ny * nx), out(ny * nx);
  for (std::size_t ky = 0; ky < ny; ++ky) {
    const std::size_t cy = (ky + ny / 2) % ny;
    for (std::size_t kx = 0; kx < nx; ++kx) {
      const std::size_t cx = (kx + nx / 2) % nx;
      const Complex v = spectrum(cy, cx);
      in.data[ky * nx + kx][0] = v.real();
      in.data[ky * nx + kx][1] = v.imag();
    }
  }
  fftw_execute_dft(PlanCache::instance().get(ny, nx, FFTW_BACKWARD), in.data, out.data);

  ComplexField field(g);
  const double scale = 1.0 / static_cast<double>(nx * ny);
  for (std::size_t i = 0; i < nx * ny; ++i)
    field.values[i] = Complex(out.data[i][0] * scale, out.data[i][1] * scale);
  return field;
}

ComplexField dft2(const RealField& field) { return dft2(to_complex(field)); }

std::pair<std::vector<double>, std::vector<double>> frequency_axes(const Grid2D& grid) {
  grid.validate();
  std::vector<double> nu_x(grid.nx), nu_y(grid.ny);
  const auto half_x = static_cast<double>(grid.nx / 2);
  const auto half_y = static_cast<double>(grid.ny / 2);
  for (std::size_t k = 0; k < grid.nx; ++k)
    nu_x[k] = (static_cast<double>(k) - half_x) / (static_cast<double>(grid.nx) * grid.dx);
  for (std::size_t k = 0; k < grid.ny; ++k)
    nu_y[k] = (static_cast<double>(k) - half_y) / (static_cast<double>(grid.ny) * grid.dy);
  return {std::move(nu_x), std::move(nu_y)};
}

ComplexField to_complex(const RealField& field) {
  ComplexField out(field.grid);
  for (std::size_t i = 0; i < field.size(); ++i) out.values[i] = Complex(field.values[i], 0.0);
  return out;
}

RealField real_part(const ComplexField& field) {
  RealField out(field.grid);
  for (std::size_t i = 0; i < field.size(); ++i) out.values[i] = field.values[i].real();
  return out;
}

RealField abs_squared(const ComplexField& field) {
  RealField out(field.grid);
  for (std::size_t i = 0; i < field.size(); ++i) out.values[i] = std::norm(field.values[i]);
  return out;
}

void require_same_grid(const Grid2D& a, const Grid2D& b, const char* what) {
  if (a.nx != b.nx || a.ny != b.ny) {
    std::ostringstream os;
    os << what << ": grid mismatch (" << a.ny << "x" << a.nx << " vs " << b.ny << "x"
       << b.nx << ")";
    throw DimensionError(os.str());
  }
}

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v)) throw DegenerateError(std::string(what) + ": non-finite value");
}

double mean(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
  const double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

}  // namespace lsdnn

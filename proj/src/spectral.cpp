#include "lsdnn/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace lsdnn {

RealField filter_transfer(const PowerLawFilter& filter) {
  if (!(filter.q >= 0.0) || !std::isfinite(filter.q)) throw UsageError("filter q must be >= 0");
  const auto [nu_x, nu_y] = frequency_axes(filter.grid);
  RealField c(filter.grid);
  if (filter.q == 0.0) {
    std::fill(c.values.begin(), c.values.end(), 1.0);
    return c;
  }
  double peak = 0.0;
  for (std::size_t iy = 0; iy < c.ny(); ++iy)
    for (std::size_t ix = 0; ix < c.nx(); ++ix) {
      const double nu2 = nu_x[ix] * nu_x[ix] + nu_y[iy] * nu_y[iy];
      const double v = nu2 == 0.0 ? 0.0 : std::pow(nu2, filter.q);
      c(iy, ix) = v;
      peak = std::max(peak, v);
    }
  for (double& v : c.values) v /= peak;
  return c;
}

RealField apply_transfer(const RealField& f, const RealField& transfer) {
  require_same_grid(f.grid, transfer.grid, "apply_transfer");
  ComplexField spectrum = dft2(f);
  for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum.values[i] *= transfer.values[i];
  return real_part(idft2(spectrum));
}

RealField apply_filter(const RealField& f, const PowerLawFilter& filter) {
  require_same_grid(f.grid, filter.grid, "apply_filter");
  if (filter.q == 0.0) return f;  // C = 1 exactly; skip the transform round-off
  return apply_transfer(f, filter_transfer(filter));
}

RealField psd2d(const std::vector<RealField>& images) {
  if (images.empty()) throw UsageError("psd2d needs at least one image");
  RealField psd(images.front().grid, 0.0);
  for (const RealField& img : images) {
    require_same_grid(img.grid, psd.grid, "psd2d");
    const ComplexField s = dft2(img);
    for (std::size_t i = 0; i < s.size(); ++i) psd.values[i] += std::norm(s.values[i]);
  }
  const double inv = 1.0 / static_cast<double>(images.size());
  for (double& v : psd.values) v *= inv;
  return psd;
}

std::vector<double> psd_diagonal(const RealField& psd) {
  if (psd.nx() != psd.ny()) throw DimensionError("psd_diagonal requires a square grid");
  const std::size_t c = psd.nx() / 2;
  std::vector<double> diag(c);
  for (std::size_t k = 0; k < c; ++k) diag[k] = psd(c + k, c + k);
  const double peak = *std::max_element(diag.begin(), diag.end());
  if (peak > 0.0)
    for (double& v : diag) v /= peak;
  return diag;
}

std::vector<double> psd_horizontal(const RealField& psd) {
  const std::size_t cx = psd.nx() / 2, cy = psd.ny() / 2;
  std::vector<double> cut(cx);
  for (std::size_t k = 0; k < cx; ++k) cut[k] = psd(cy, cx + k);
  return cut;
}

RadialProfile radial_profile(const RealField& psd) {
  const auto cx = static_cast<double>(psd.nx() / 2);
  const auto cy = static_cast<double>(psd.ny() / 2);
  const std::size_t bins = std::min(psd.nx(), psd.ny()) / 2;
  std::vector<double> sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t iy = 0; iy < psd.ny(); ++iy)
    for (std::size_t ix = 0; ix < psd.nx(); ++ix) {
      const double r = std::hypot(static_cast<double>(ix) - cx, static_cast<double>(iy) - cy);
      const auto b = static_cast<std::size_t>(std::floor(r + 0.5));
      if (b >= bins) continue;
      sum[b] += psd(iy, ix);
      ++count[b];
    }
  RadialProfile p;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    p.radius.push_back(static_cast<double>(b));
    p.power.push_back(sum[b] / static_cast<double>(count[b]));
  }
  return p;
}

double radial_slope(const RealField& psd) {
  const RadialProfile p = radial_profile(psd);
  const double n = static_cast<double>(std::min(psd.nx(), psd.ny()));
  const double lo = n / 16.0, hi = n / 4.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < p.radius.size(); ++i) {
    if (p.radius[i] < lo || p.radius[i] > hi || !(p.power[i] > 0.0)) continue;
    const double x = std::log(p.radius[i]), y = std::log(p.power[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) throw DegenerateError("radial_slope: not enough bins in fit range");
  const double md = static_cast<double>(m);
  return (md * sxy - sx * sy) / (md * sxx - sx * sx);
}

}  // namespace lsdnn

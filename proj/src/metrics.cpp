#include "lsdnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

namespace lsdnn {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kWindowSigma = 1.5;

std::vector<double> gaussian_taps() {
  std::vector<double> t(kWindow);
  const double c = static_cast<double>(kWindow / 2);
  double s = 0.0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - c;
    t[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    s += t[i];
  }
  for (double& v : t) v /= s;
  return t;
}

// Separable valid-mode Gaussian filter.
std::vector<double> filter_valid(const std::vector<double>& x, std::size_t ny, std::size_t nx,
                                 const std::vector<double>& taps) {
  const std::size_t oy = ny - kWindow + 1, ox = nx - kWindow + 1;
  std::vector<double> tmp(ny * ox, 0.0), out(oy * ox, 0.0);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x0 = 0; x0 < ox; ++x0) {
      double s = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) s += taps[k] * x[y * nx + x0 + k];
      tmp[y * ox + x0] = s;
    }
  for (std::size_t y0 = 0; y0 < oy; ++y0)
    for (std::size_t x0 = 0; x0 < ox; ++x0) {
      double s = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) s += taps[k] * tmp[(y0 + k) * ox + x0];
      out[y0 * ox + x0] = s;
    }
  return out;
}

double range_of(const RealField& f) {
  const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
  return *hi - *lo;
}

}  // namespace

double pcc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw DimensionError("pcc: size mismatch");
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw DegenerateError("pcc: zero-variance input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pcc(const RealField& a, const RealField& b) {
  require_same_grid(a.grid, b.grid, "pcc");
  return pcc(a.span(), b.span());
}

double mse(const RealField& a, const RealField& b) {
  require_same_grid(a.grid, b.grid, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
  return s / static_cast<double>(a.size());
}

double mae(const RealField& a, const RealField& b) {
  require_same_grid(a.grid, b.grid, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a.values[i] - b.values[i]);
  return s / static_cast<double>(a.size());
}

double psnr(const RealField& a, const RealField& b, double peak) {
  if (!(peak > 0.0)) throw UsageError("psnr: peak must be > 0");
  const double e = mse(a, b);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / e);
}

double ssim(const RealField& a, const RealField& b, double dynamic_range) {
  require_same_grid(a.grid, b.grid, "ssim");
  if (a.nx() < kWindow || a.ny() < kWindow) throw DimensionError("ssim: fields smaller than 11x11");
  const double l = dynamic_range > 0.0 ? dynamic_range : 1.0;
  const double c1 = (0.01 * l) * (0.01 * l), c2 = (0.03 * l) * (0.03 * l);
  const std::size_t n = a.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a.values[i] * a.values[i];
    bb[i] = b.values[i] * b.values[i];
    ab[i] = a.values[i] * b.values[i];
  }
  const auto taps = gaussian_taps();
  const auto mu_a = filter_valid(a.values, a.ny(), a.nx(), taps);
  const auto mu_b = filter_valid(b.values, a.ny(), a.nx(), taps);
  const auto e_aa = filter_valid(aa, a.ny(), a.nx(), taps);
  const auto e_bb = filter_valid(bb, a.ny(), a.nx(), taps);
  const auto e_ab = filter_valid(ab, a.ny(), a.nx(), taps);
  double s = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    s += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
         ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return s / static_cast<double>(mu_a.size());
}

double ssim(const RealField& a, const RealField& b) {
  return ssim(a, b, std::max(range_of(a), range_of(b)));
}

RealField resolve_affine(const RealField& reconstruction, const RealField& reference,
                         AffineMethod method) {
  require_same_grid(reconstruction.grid, reference.grid, "resolve_affine");
  const std::size_t n = reconstruction.size();
  if (method == AffineMethod::Histogram) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
      return reconstruction.values[i] < reconstruction.values[j];
    });
    std::vector<double> sorted_ref = reference.values;
    std::sort(sorted_ref.begin(), sorted_ref.end());
    RealField out(reconstruction.grid);
    for (std::size_t r = 0; r < n; ++r) out.values[order[r]] = sorted_ref[r];
    return out;
  }
  const double mr = mean(reconstruction.values), mf = mean(reference.values);
  double srr = 0, srf = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dr = reconstruction.values[i] - mr;
    srr += dr * dr;
    srf += dr * (reference.values[i] - mf);
  }
  if (!(srr > 0.0)) throw DegenerateError("resolve_affine: zero-variance reconstruction");
  const double gain = srf / srr;
  RealField out(reconstruction.grid);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = gain * (reconstruction.values[i] - mr) + mf;
  return out;
}

void MetricReport::aggregate() {
  mean = MetricRow{"mean"};
  std = MetricRow{"std"};
  if (rows.empty()) return;
  const double n = static_cast<double>(rows.size());
  auto column = [&](auto member, double& m, double& s) {
    m = 0.0;
    for (const MetricRow& r : rows) m += r.*member;
    m /= n;
    s = 0.0;
    if (!std::isfinite(m)) {
      // Identical-input PSNR is +inf in every row.
      const bool same = std::all_of(rows.begin(), rows.end(), [&](const MetricRow& r) { return r.*member == m; });
      s = same ? 0.0 : std::numeric_limits<double>::quiet_NaN();
      return;
    }
    for (const MetricRow& r : rows) s += (r.*member - m) * (r.*member - m);
    s = std::sqrt(s / n);
  };
  column(&MetricRow::pcc, mean.pcc, std.pcc);
  column(&MetricRow::psnr, mean.psnr, std.psnr);
  column(&MetricRow::ssim, mean.ssim, std.ssim);
  column(&MetricRow::mse, mean.mse, std.mse);
  column(&MetricRow::mae, mean.mae, std.mae);
}

MetricReport report(const std::vector<RealField>& reconstructions,
                    const std::vector<RealField>& references, double peak,
                    const std::vector<std::string>& ids, AffineMethod affine) {
  if (reconstructions.size() != references.size())
    throw DimensionError("report: reconstruction/reference count mismatch");
  if (!ids.empty() && ids.size() != references.size())
    throw DimensionError("report: id count mismatch");
  MetricReport rep;
  rep.peak = peak;
  rep.affine = affine;
  for (std::size_t i = 0; i < references.size(); ++i) {
    const RealField& ref = references[i];
    const RealField fitted = resolve_affine(reconstructions[i], ref, affine);
    MetricRow row;
    row.id = ids.empty() ? std::to_string(i) : ids[i];
    row.pcc = pcc(reconstructions[i], ref);
    row.psnr = psnr(fitted, ref, peak);
    row.ssim = ssim(fitted, ref, range_of(ref));
    row.mse = mse(fitted, ref);
    row.mae = mae(fitted, ref);
    rep.rows.push_back(std::move(row));
  }
  rep.aggregate();
  return rep;
}

void write_report_csv(const std::filesystem::path& path, const MetricReport& rep) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write: " + path.string());
  out << std::setprecision(17);
  out << "# label=" << rep.label << " peak=" << rep.peak << " peak_convention=f_max affine="
      << (rep.affine == AffineMethod::LeastSquares ? "least_squares" : "histogram") << '\n';
  out << "id,PCC,PSNR_dB,SSIM,MSE,MAE\n";
  auto line = [&](const MetricRow& r) {
    out << r.id << ',' << r.pcc << ',' << r.psnr << ',' << r.ssim << ',' << r.mse << ',' << r.mae
        << '\n';
  };
  for (const MetricRow& r : rep.rows) line(r);
  line(rep.mean);
  line(rep.std);
}

}  // namespace lsdnn

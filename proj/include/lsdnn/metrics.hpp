#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lsdnn/field.hpp"

namespace lsdnn {

// Pearson correlation; throws DegenerateError for a constant argument.
double pcc(const RealField& a, const RealField& b);
double pcc(std::span<const double> a, std::span<const double> b);

double mse(const RealField& a, const RealField& b);
double mae(const RealField& a, const RealField& b);

// 10 log10(peak^2 / MSE); +inf for identical inputs.
double psnr(const RealField& a, const RealField& b, double peak);

// Mean local SSIM over fully contained 11x11 Gaussian windows (sigma 1.5),
// C1 = (0.01 L)^2, C2 = (0.03 L)^2.
double ssim(const RealField& a, const RealField& b, double dynamic_range);
// dynamic_range = max of the two fields' ranges (symmetric form).
double ssim(const RealField& a, const RealField& b);

enum class AffineMethod { LeastSquares, Histogram };

// Least squares: gain/offset fitted from reconstruction onto reference.
// Histogram: rank-wise transfer of the reference value distribution.
RealField resolve_affine(const RealField& reconstruction, const RealField& reference,
                         AffineMethod method = AffineMethod::LeastSquares);

struct MetricRow {
  std::string id;
  double pcc = 0, psnr = 0, ssim = 0, mse = 0, mae = 0;
};

struct MetricReport {
  std::string label;
  double peak = 0.0;
  AffineMethod affine = AffineMethod::LeastSquares;
  std::vector<MetricRow> rows;
  MetricRow mean;
  MetricRow std;  // population standard deviation

  void aggregate();
};

// PCC is taken on the raw reconstruction; the remaining columns after
// resolve_affine against the reference. SSIM uses the reference's range.
MetricReport report(const std::vector<RealField>& reconstructions,
                    const std::vector<RealField>& references, double peak,
                    const std::vector<std::string>& ids = {},
                    AffineMethod affine = AffineMethod::LeastSquares);

void write_report_csv(const std::filesystem::path& path, const MetricReport& report);

}  // namespace lsdnn

#include <doctest.h>

#include <fstream>

#include "lsdnn/metrics.hpp"
#include "support.hpp"

using namespace lsdnn;
using namespace testing;

namespace {

// SSIM evaluated window by window with explicit 2-D Gaussian weights.
double ssim_direct(const RealField& a, const RealField& b, double L) {
  const int W = 11;
  const double sigma = 1.5;
  std::vector<double> w(W * W);
  double ws = 0.0;
  for (int y = 0; y < W; ++y)
    for (int x = 0; x < W; ++x) {
      w[y * W + x] = std::exp(-((x - 5) * (x - 5) + (y - 5) * (y - 5)) / (2 * sigma * sigma));
      ws += w[y * W + x];
    }
  for (double& v : w) v /= ws;
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  double total = 0.0;
  int count = 0;
  for (std::size_t y0 = 0; y0 + W <= a.ny(); ++y0)
    for (std::size_t x0 = 0; x0 + W <= a.nx(); ++x0) {
      double ma = 0, mb = 0;
      for (int y = 0; y < W; ++y)
        for (int x = 0; x < W; ++x) {
          ma += w[y * W + x] * a(y0 + y, x0 + x);
          mb += w[y * W + x] * b(y0 + y, x0 + x);
        }
      double va = 0, vb = 0, cov = 0;
      for (int y = 0; y < W; ++y)
        for (int x = 0; x < W; ++x) {
          const double da = a(y0 + y, x0 + x) - ma, db = b(y0 + y, x0 + x) - mb;
          va += w[y * W + x] * da * da;
          vb += w[y * W + x] * db * db;
          cov += w[y * W + x] * da * db;
        }
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST_CASE("pcc properties") {
  const Grid2D g = Grid2D::square(16, 1.0);
  const RealField a = random_real(g, 1), b = random_real(g, 2);
  CHECK(pcc(a, a) == doctest::Approx(1.0).epsilon(1e-14));
  RealField t = b;
  for (double& v : t.values) v = -3.0 * v + 7.0;
  CHECK(pcc(a, t) == doctest::Approx(-pcc(a, b)).epsilon(1e-12));
  CHECK_THROWS_AS(pcc(a, RealField(g, 2.0)), DegenerateError);
  CHECK_THROWS_AS(pcc(a, random_real(Grid2D::square(8, 1.0), 3)), DimensionError);
  // Independent two-pass formula.
  const double ma = mean(a.values), mb = mean(b.values);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a.values[i] - ma) * (b.values[i] - mb);
    saa += (a.values[i] - ma) * (a.values[i] - ma);
    sbb += (b.values[i] - mb) * (b.values[i] - mb);
  }
  CHECK(pcc(a, b) == doctest::Approx(sab / std::sqrt(saa * sbb)).epsilon(1e-13));
}

TEST_CASE("psnr construction cases") {
  const Grid2D g = Grid2D::square(16, 1.0);
  const RealField a = random_real(g, 4);
  RealField b = a;
  // Uniform offset 0.1 with peak 1: MSE = 0.01, so 20 dB.
  for (double& v : b.values) v += 0.1;
  CHECK(std::fabs(psnr(a, b, 1.0) - 20.0) < 1e-9);
  CHECK(std::isinf(psnr(a, a, 1.0)));
  CHECK_THROWS_AS(psnr(a, b, 0.0), UsageError);
  CHECK(mse(a, b) == doctest::Approx(0.01));
  CHECK(mae(a, b) == doctest::Approx(0.1));
}

TEST_CASE("ssim against a direct windowed evaluation") {
  const Grid2D g{24, 20, 1.0, 1.0};
  const RealField a = random_real(g, 5), b = random_real(g, 6);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ssim(a, b, 1.0) == doctest::Approx(ssim_direct(a, b, 1.0)).epsilon(1e-10));
  RealField c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.values[i] = 0.7 * a.values[i] + 0.3 * b.values[i];
  CHECK(ssim(a, c, 2.0) == doctest::Approx(ssim_direct(a, c, 2.0)).epsilon(1e-10));
  CHECK_THROWS_AS(ssim(random_real(Grid2D::square(8, 1.0), 1), random_real(Grid2D::square(8, 1.0), 2)),
                  DimensionError);
}

TEST_CASE("affine resolution") {
  const Grid2D g = Grid2D::square(16, 1.0);
  const RealField ref = random_real(g, 7);
  RealField rec = ref;
  for (double& v : rec.values) v = -2.0 * v + 5.0;
  CHECK(max_abs_diff(resolve_affine(rec, ref), ref) < 1e-12);
  const RealField hist = resolve_affine(rec, ref, AffineMethod::Histogram);
  // Gain is negative, so ranks flip and the distribution is preserved.
  std::vector<double> s1 = hist.values, s2 = ref.values;
  std::sort(s1.begin(), s1.end());
  std::sort(s2.begin(), s2.end());
  CHECK(s1 == s2);
  CHECK_THROWS_AS(resolve_affine(RealField(g, 1.0), ref), DegenerateError);
}

TEST_CASE("report aggregates and CSV layout") {
  TempDir tmp("report");
  const Grid2D g = Grid2D::square(16, 1.0);
  std::vector<RealField> refs{random_real(g, 1), random_real(g, 2)};
  MetricReport self = report(refs, refs, std::numbers::pi, {"a", "b"});
  CHECK(self.mean.pcc == doctest::Approx(1.0));
  CHECK(self.mean.ssim == doctest::Approx(1.0));
  CHECK(self.mean.psnr > 200.0);
  std::vector<RealField> noisy = refs;
  for (auto& f : noisy)
    for (std::size_t i = 0; i < f.size(); i += 3) f.values[i] += 0.2;
  MetricReport r = report(noisy, refs, 1.0, {"a", "b"});
  r.label = "test";
  CHECK(r.rows.size() == 2);
  CHECK(r.mean.pcc == doctest::Approx(0.5 * (r.rows[0].pcc + r.rows[1].pcc)));
  CHECK(r.std.mse == doctest::Approx(0.5 * std::fabs(r.rows[0].mse - r.rows[1].mse)));
  write_report_csv(tmp / "r.csv", r);
  std::ifstream in(tmp / "r.csv");
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  CHECK(l1.rfind("# label=test", 0) == 0);
  CHECK(l2 == "id,PCC,PSNR_dB,SSIM,MSE,MAE");
  CHECK(l3.rfind("a,", 0) == 0);
}

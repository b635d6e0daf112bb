// Acceptance checks. One line per criterion:
//   criterion N: PASS|FAIL <details> (<seconds>s)
// Usage: lsdnn_acceptance [work_dir] [--only a,b,...]
// Exit status is nonzero when any selected criterion fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "lsdnn/config.hpp"
#include "lsdnn/dataset.hpp"
#include "lsdnn/metrics.hpp"
#include "lsdnn/neural.hpp"
#include "lsdnn/noise.hpp"
#include "lsdnn/pipeline.hpp"
#include "lsdnn/retrieval.hpp"
#include "lsdnn/spectral.hpp"
#include "support.hpp"

using namespace lsdnn;
using namespace testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string details;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double rel_diff(const ComplexField& a, const ComplexField& b) {
  double scale = 0.0;
  for (const Complex& v : b.values) scale = std::max(scale, std::abs(v));
  return max_abs_diff(a, b) / scale;
}

// ---- 1: DFT

Outcome dft_correctness() {
  double parseval = 0.0, round = 0.0, oracle = 0.0;
  for (auto [ny, nx] : {std::pair<std::size_t, std::size_t>{64, 64}, {128, 64}, {256, 256}}) {
    const ComplexField x = random_complex(Grid2D{nx, ny, 1.0, 1.0}, static_cast<unsigned>(nx + ny));
    const ComplexField X = dft2(x);
    const double ex = energy(x);
    parseval = std::max(parseval, std::fabs(energy(X) / static_cast<double>(x.size()) - ex) / ex);
    round = std::max(round, rel_diff(idft2(X), x));
  }
  for (auto [ny, nx] : {std::pair<std::size_t, std::size_t>{2, 2}, {4, 8}, {16, 16}, {32, 32}, {32, 16}}) {
    const ComplexField x = random_complex(Grid2D{nx, ny, 1.0, 1.0}, static_cast<unsigned>(7 * nx + ny));
    oracle = std::max(oracle, rel_diff(dft2(x), naive_dft(x)));
  }
  return {parseval < 1e-10 && round < 1e-12 && oracle < 1e-10,
          "parseval=" + fmt(parseval) + " roundtrip=" + fmt(round) + " oracle=" + fmt(oracle)};
}

// ---- 2: propagator

Outcome propagator_physics() {
  const OpticalConfig c = desk_optics(64);
  OpticalConfig zero = c;
  zero.z = 0.0;
  double unit = 0.0, ident = 0.0, semi = 0.0, mean_err = 0.0;
  for (unsigned s = 0; s < 100; ++s) {
    const RealField f = random_real(c.grid, 1000 + s, 0.0, std::numbers::pi);
    ComplexField u(c.grid);
    for (std::size_t i = 0; i < u.size(); ++i) u.values[i] = std::polar(1.0, f.values[i]);
    const double e0 = energy(u);
    unit = std::max(unit, std::fabs(energy(propagate(u, c)) - e0) / e0);
    ident = std::max(ident, max_abs_diff(propagate(u, zero), u));
    const ComplexField a = propagate_by(propagate_by(u, c.wavelength, 0.1), c.wavelength, 0.3);
    semi = std::max(semi, max_abs_diff(a, propagate_by(u, c.wavelength, 0.4)));
    mean_err = std::max(mean_err, std::fabs(mean(forward_intensity(f, c).values) - 1.0));
  }
  return {unit < 1e-12 && ident < 1e-12 && semi < 1e-10 && mean_err < 1e-10,
          "unitarity=" + fmt(unit) + " identity=" + fmt(ident) + " semigroup=" + fmt(semi) +
              " mean_g0=" + fmt(mean_err)};
}

// ---- 3: noise

double poisson_pmf(double m, std::uint64_t k) {
  return std::exp(static_cast<double>(k) * std::log(m) - m - std::lgamma(static_cast<double>(k) + 1.0));
}

// Upper 0.001 point of chi-square (Wilson-Hilferty).
double chi2_critical_001(double dof) {
  const double z = 3.090232306167813;
  const double a = 2.0 / (9.0 * dof);
  return dof * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

// Chi-square of integer counts against Poisson(m); adjacent bins pooled
// until each expected count is at least 5.
std::pair<double, double> chi2_fit(const std::vector<double>& counts, double m) {
  std::map<std::uint64_t, double> observed;
  for (double v : counts) observed[static_cast<std::uint64_t>(v)] += 1.0;
  const double n = static_cast<double>(counts.size());
  std::vector<double> e, o;
  double ea = 0.0, oa = 0.0, covered = 0.0;
  for (std::uint64_t k = 0;; ++k) {
    const double p = poisson_pmf(m, k);
    covered += p;
    ea += p * n;
    if (auto it = observed.find(k); it != observed.end()) oa += it->second;
    const double tail = (1.0 - covered) * n;
    if (tail < 5.0) {
      double rest = 0.0;
      for (const auto& [kk, c] : observed)
        if (kk > k) rest += c;
      e.push_back(ea + tail);
      o.push_back(oa + rest);
      break;
    }
    if (ea >= 5.0) {
      e.push_back(ea);
      o.push_back(oa);
      ea = oa = 0.0;
    }
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) chi2 += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
  return {chi2, static_cast<double>(e.size() - 1)};
}

Outcome noise_model() {
  OpticalConfig c;
  c.grid = Grid2D::square(256, 36e-6);
  const RealField phase = random_real(c.grid, 31, 0.0, std::numbers::pi);
  const RealField flat(c.grid, 0.4);
  bool ok = true;
  std::string details;
  for (double p : {1.0, 10.0}) {
    RngStream rng(77, static_cast<std::uint64_t>(p));
    const Measurement m = measure(phase, c, NoiseModel{p, 0.0, 77}, rng);
    const double sigma = std::sqrt(p / static_cast<double>(m.counts.size()));
    const double z = (mean(m.counts.values) - p) / sigma;
    RngStream rng2(78, static_cast<std::uint64_t>(p));
    const Measurement u = measure(flat, c, NoiseModel{p, 0.0, 78}, rng2);
    const auto [chi2, dof] = chi2_fit(u.counts.values, p);
    const double crit = chi2_critical_001(dof);
    ok = ok && std::fabs(z) < 6.0 && chi2 < crit;
    details += "p=" + fmt(p) + ":z=" + fmt(z, 3) + ",chi2=" + fmt(chi2, 4) + "/" + fmt(crit, 4) + " ";
  }
  details.pop_back();
  return {ok, details};
}

// ---- 4: retrieval

Outcome retrieval() {
  const OpticalConfig c = desk_optics(64);
  double one_step = 0.0, worst_ratio = 0.0;
  for (unsigned s = 0; s < 5; ++s) {
    const RealField g = forward_intensity(random_real(c.grid, 500 + s, 0.0, std::numbers::pi), c);
    const GsState st = gs_iterate(gs_initial(g, c), g, c);
    one_step = std::max(one_step, max_abs_diff(approximant(g, c), st.phase));
  }
  // Four 1 rad Gaussian bumps, sigma 4 px; every phantom must reach 10%.
  std::size_t below = 0;
  const std::size_t phantoms = 20;
  for (unsigned s = 0; s < phantoms; ++s) {
    const RealField g = forward_intensity(smooth_phantom(c.grid, 40 + s), c);
    const GsState st = gs_solve(g, c, 100);
    const double ratio = st.residuals.back() / st.residuals.front();
    worst_ratio = std::max(worst_ratio, ratio);
    if (ratio < 0.1) ++below;
  }
  return {one_step < 1e-12 && below == phantoms,
          "approximant_vs_iterate=" + fmt(one_step) + " phantoms_below_10pct=" + std::to_string(below) + "/" +
              std::to_string(phantoms) + " worst_residual_ratio=" + fmt(worst_ratio)};
}

// ---- 5: metrics

Tensor4 as_tensor(const RealField& f) {
  Tensor4 t(1, 1, f.ny(), f.nx());
  t.v = f.values;
  return t;
}

Outcome metrics() {
  const Grid2D g = Grid2D::square(32, 1.0);
  const RealField a = random_real(g, 3), b = random_real(g, 4);
  const double self = npcc_loss(as_tensor(a), as_tensor(a)).loss;
  double affine = 0.0;
  for (auto [gain, offset] : {std::pair{2.5, -1.0}, {0.01, 40.0}, {-3.0, 0.5}}) {
    RealField t = b;
    for (double& v : t.values) v = gain * v + offset;
    const double expect = gain > 0 ? pcc(a, b) : -pcc(a, b);
    affine = std::max(affine, std::fabs(pcc(a, t) - expect));
    affine = std::max(affine, std::fabs(max_abs_diff(resolve_affine(t, a), resolve_affine(b, a))));
  }
  const double s = ssim(a, a);
  RealField c = a;
  for (double& v : c.values) v += 0.1;
  const double db = psnr(a, c, 1.0);
  const bool ok = std::fabs(self + 1.0) < 1e-12 && affine < 1e-12 && std::fabs(s - 1.0) < 1e-12 &&
                  std::fabs(db - 20.0) < 1e-9;
  return {ok, "npcc_self=" + fmt(self, 16) + " affine=" + fmt(affine) + " ssim_self=" + fmt(s, 16) +
                  " psnr=" + fmt(db, 14)};
}

// ---- 6: gradients

Tensor4 random_tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Tensor4 t(n, c, h, w);
  for (double& v : t.v) v = d(rng);
  return t;
}

double fd_error(const std::vector<double>& analytic, std::vector<double>& param,
                const std::function<double()>& loss) {
  const double h = 1e-6;
  double diff = 0.0, sum = 0.0;
  for (std::size_t k = 0; k < param.size(); ++k) {
    const double keep = param[k];
    param[k] = keep + h;
    const double lp = loss();
    param[k] = keep - h;
    const double lm = loss();
    param[k] = keep;
    const double num = (lp - lm) / (2 * h);
    diff += (analytic[k] - num) * (analytic[k] - num);
    sum += (analytic[k] + num) * (analytic[k] + num);
  }
  return sum > 0 ? std::sqrt(diff / sum) : 0.0;
}

Outcome gradients() {
  double worst_layer = 0.0, worst_loss = 0.0;
  std::size_t checks = 0;
  for (unsigned seed = 0; seed < 20; ++seed) {
    // Loss gradient w.r.t. the prediction.
    Tensor4 p = random_tensor(3, 1, 5, 6, 900 + seed);
    const Tensor4 t = random_tensor(3, 1, 5, 6, 950 + seed);
    const LossResult lr = npcc_loss(p, t);
    worst_loss = std::max(worst_loss, fd_error(lr.grad.v, p.v, [&] { return npcc_loss(p, t).loss; }));

    for (NetworkRole role : {NetworkRole::L, NetworkRole::H, NetworkRole::S}) {
      const std::vector<std::size_t> widths =
          seed % 2 ? std::vector<std::size_t>{2, 3, 2} : std::vector<std::size_t>{3, 2};
      NetworkSpec spec = NetworkSpec::for_role(role, widths);
      spec.residual = (seed % 3) != 0;
      NetworkState st = init_state(spec, seed);
      std::mt19937_64 rng(seed * 31 + static_cast<unsigned>(role));
      std::uniform_real_distribution<double> u(-0.5, 0.5);
      for (ConvParams& cp : st.layers) {
        for (double& w : cp.weight) w = u(rng);
        for (double& b : cp.bias) b = u(rng);
      }
      const std::size_t side = 8;
      const Tensor4 x = random_tensor(2, spec.body_channels(), side, side, seed + 10);
      const Tensor4 aux = random_tensor(2, 1, side, side, seed + 20);
      // Layers are probed through a random linear readout; NPCC ignores output
      // offsets, which would leave the last bias with a zero gradient.
      const Tensor4 r = random_tensor(2, 1, side, side, seed + 30);
      const Tensor4* ap = spec.bypass ? &aux : nullptr;
      const ForwardResult fr = forward(spec, st, x, ap);
      const Gradients g = backward(spec, st, fr.cache, r);
      auto loss = [&] {
        const Tensor4 y = forward(spec, st, x, ap).output;
        double acc = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) acc += r.v[i] * y.v[i];
        return acc;
      };
      for (std::size_t li = 0; li < st.layers.size(); ++li) {
        worst_layer = std::max(worst_layer, fd_error(g[li].weight, st.layers[li].weight, loss));
        worst_layer = std::max(worst_layer, fd_error(g[li].bias, st.layers[li].bias, loss));
        ++checks;
      }
    }
  }
  return {worst_layer < 1e-4 && worst_loss < 1e-4,
          "layers_checked=" + std::to_string(checks) + " worst_layer_rel=" + fmt(worst_layer) +
              " worst_loss_rel=" + fmt(worst_loss)};
}

// ---- 7: dataset statistics

Outcome dataset_statistics() {
  const PhaseDataset d = gen_powerlaw_phase(Grid2D::square(64, 65e-6), 2.0, 256, 7);
  std::vector<RealField> imgs;
  for (const PhaseItem& it : d.items) imgs.push_back(it.phase);
  const double slope = radial_slope(psd2d(imgs));
  return {std::fabs(slope + 2.0) <= 0.3, "radial_slope=" + fmt(slope)};
}

// ---- 8 to 11: desk-scale runs

Config desk_config() {
  Config c;
  c.set("size", "64");
  c.set("dx", "65e-6");
  c.set("n_train", "512");
  c.set("n_val", "64");
  c.set("n_test", "64");
  c.set("photons", "1");
  c.set("scheme", "approximant");
  c.set("q", "0.5");
  c.set("epochs", "30");
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct DeskRuns {
  fs::path work;
  std::optional<RunSummary> a;
  double a_seconds = 0.0;
};

Outcome ls_ordering(DeskRuns& r) {
  const auto t0 = Clock::now();
  r.a = run_ls(desk_config(), r.work / "run_a", true);
  r.a_seconds = seconds_since(t0);
  const double ap = r.a->approximant.mean.pcc, l = r.a->low.mean.pcc, s = r.a->sweep.at(0).synth.mean.pcc;
  const bool ok = ap < l && s >= l - 0.01 && r.a_seconds <= 1800.0;
  return {ok, "pcc approximant=" + fmt(ap) + " L=" + fmt(l) + " S=" + fmt(s) +
                  " S_exceeds_L=" + (s > l ? "yes" : "no") + " run_seconds=" + fmt(r.a_seconds, 5)};
}

Outcome q_plateau(DeskRuns& r) {
  if (!r.a) return {false, "criterion 8 run unavailable"};
  const auto t0 = Clock::now();
  Config c = desk_config();
  c.set("q_sweep", "0.1,2.0");
  const RunSummary sw = run_ls(c, r.work / "run_sweep", true);
  const double seconds = r.a_seconds + seconds_since(t0);
  // q = 0.5 comes from run A; both runs share the same L.
  const bool same_low = sw.sweep.at(0).low_hash == r.a->sweep.at(0).low_hash;
  const double mid = r.a->sweep.at(0).synth.mean.pcc;
  const double lo = sw.sweep.at(0).synth.mean.pcc, hi = sw.sweep.at(1).synth.mean.pcc;
  const bool ok = same_low && mid >= lo - 0.02 && mid >= hi - 0.02 && seconds <= 3600.0;
  return {ok, "S pcc q0.1=" + fmt(lo) + " q0.5=" + fmt(mid) + " q2=" + fmt(hi) +
                  " shared_L=" + (same_low ? "yes" : "no") + " sweep_seconds=" + fmt(seconds, 5)};
}

Outcome spectral_recovery(DeskRuns& r) {
  if (!r.a) return {false, "criterion 8 run unavailable"};
  const QResult& q = r.a->sweep.at(0);
  const std::size_t n = q.psd_synth.size() * 2;
  std::size_t wins = 0, bins = 0;
  for (std::size_t k = n / 4; k < n / 2; ++k, ++bins)
    if (q.psd_synth[k] > q.psd_low[k]) ++wins;
  const double frac = static_cast<double>(wins) / static_cast<double>(bins);
  return {frac >= 0.6, "S_above_L_bins=" + std::to_string(wins) + "/" + std::to_string(bins)};
}

Outcome reproducibility(DeskRuns& r) {
  if (!r.a) return {false, "criterion 8 run unavailable"};
  Config c;
  c.load(r.a->manifest);
  run_ls(c, r.work / "run_a_rerun", true);
  std::size_t same = 0, total = 0;
  std::string mismatched;
  for (const auto& e : fs::directory_iterator(r.work / "run_a" / "eval")) {
    if (e.path().extension() != ".csv") continue;
    ++total;
    const fs::path other = r.work / "run_a_rerun" / "eval" / e.path().filename();
    if (fs::exists(other) && slurp(e.path()) == slurp(other))
      ++same;
    else
      mismatched += " " + e.path().filename().string();
  }
  return {total > 0 && same == total,
          "identical_csv=" + std::to_string(same) + "/" + std::to_string(total) + mismatched};
}

}  // namespace

int main(int argc, char** argv) {
  set_warnings_enabled(false);
  fs::path work = fs::temp_directory_path() / "lsdnn_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      work = arg;
    }
  }
  fs::create_directories(work);
  DeskRuns desk{work, std::nullopt, 0.0};

  struct Criterion {
    int id;
    double budget;  // seconds
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, 10, dft_correctness},
      {2, 30, propagator_physics},
      {3, 60, noise_model},
      {4, 60, retrieval},
      {5, 10, metrics},
      {6, 120, gradients},
      {7, 30, dataset_statistics},
      {8, 1800, [&] { return ls_ordering(desk); }},
      {9, 3600, [&] { return q_plateau(desk); }},
      {10, 1e9, [&] { return spectral_recovery(desk); }},
      {11, 1e9, [&] { return reproducibility(desk); }},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    if (c.id >= 9 && c.id <= 11 && !desk.a && (only.empty() || only.count(8) == 0)) {
      // Later desk criteria need the criterion 8 run.
      ls_ordering(desk);
    }
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (c.id <= 7 && secs > c.budget) {
      o.pass = false;
      o.details += " over_budget";
    }
    if (!o.pass) ++failures;
    std::printf("criterion %d: %s %s (%.1fs)\n", c.id, o.pass ? "PASS" : "FAIL", o.details.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

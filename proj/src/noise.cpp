#include "lsdnn/noise.hpp"

#include <cmath>
#include <numbers>

namespace lsdnn {

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t index)
    : seed_(seed), index_(index), state_(mix64(mix64(seed) ^ (index * 0x9e3779b97f4a7c15ULL + 1))) {}

std::uint64_t RngStream::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return mix64(state_);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double RngStream::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void NoiseModel::validate() const {
  if (!(photons > 0.0)) throw UsageError("photon flux must be > 0 (or inf)");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw UsageError("sigma must be >= 0");
}

namespace {

std::uint64_t poisson_inversion(double mean, RngStream& rng) {
  const double u = rng.uniform();
  double term = std::exp(-mean);
  double cdf = term;
  std::uint64_t k = 0;
  // term underflows long after the cdf saturates for mean < 30
  while (u > cdf && term > 0.0) {
    ++k;
    term *= mean / static_cast<double>(k);
    cdf += term;
  }
  return k;
}

// Hormann's transformed rejection with squeeze.
std::uint64_t poisson_ptrs(double mean, RngStream& rng) {
  const double smu = std::sqrt(mean);
  const double b = 0.931 + 2.53 * smu;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * log_mean - std::lgamma(k + 1.0))
      return static_cast<std::uint64_t>(k);
  }
}

}  // namespace

std::uint64_t poisson_sample(double mean, RngStream& rng) {
  if (!(mean >= 0.0) || !std::isfinite(mean))
    throw DegenerateError("poisson mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  return mean < 30.0 ? poisson_inversion(mean, rng) : poisson_ptrs(mean, rng);
}

RealField poisson_rate(const RealField& g0, double photons) {
  const double m = mean(g0.values);
  if (!(m > 0.0)) throw DegenerateError("noiseless image has nonpositive mean");
  RealField rate(g0.grid);
  for (std::size_t i = 0; i < g0.size(); ++i) rate.values[i] = photons * g0.values[i] / m;
  return rate;
}

Measurement measure(const RealField& phase, const OpticalConfig& config,
                    const NoiseModel& noise, RngStream& rng) {
  noise.validate();
  Measurement m;
  m.noiseless = forward_intensity(phase, config);
  if (noise.noiseless()) {
    m.counts = m.noiseless;
    if (noise.sigma > 0.0)
      for (double& v : m.counts.values) v += noise.sigma * rng.normal();
    return m;
  }
  const RealField rate = poisson_rate(m.noiseless, noise.photons);
  m.counts = RealField(rate.grid);
  for (std::size_t i = 0; i < rate.size(); ++i) {
    double v = static_cast<double>(poisson_sample(rate.values[i], rng));
    if (noise.sigma > 0.0) v += noise.sigma * rng.normal();
    m.counts.values[i] = v;
  }
  return m;
}

}  // namespace lsdnn

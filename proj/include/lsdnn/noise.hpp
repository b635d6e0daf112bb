#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "lsdnn/field.hpp"
#include "lsdnn/optics.hpp"

namespace lsdnn {

// Counter-based stream: the starting state is a hash of (seed, index), so one
// image's draws never depend on how many other images were synthesized first.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next_u64();
  double uniform();          // [0, 1)
  double uniform_open();     // (0, 1]
  double normal();           // standard normal, Box-Muller

  std::uint64_t seed() const { return seed_; }
  std::uint64_t index() const { return index_; }

 private:
  std::uint64_t seed_;
  std::uint64_t index_;
  std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);

inline constexpr double kNoiselessPhotons = std::numeric_limits<double>::infinity();

struct NoiseModel {
  double photons = 1.0;  // mean detected photons per pixel per frame, +inf = noiseless
  double sigma = 0.0;    // Gaussian read noise, photon units
  std::uint64_t seed = 0;

  bool noiseless() const { return std::isinf(photons); }
  void validate() const;
};

struct Measurement {
  RealField noiseless;  // g0
  RealField counts;     // g
};

// Inversion for mean < 30, transformed rejection (PTRS) above.
std::uint64_t poisson_sample(double mean, RngStream& rng);

// g = Poisson(p g0 / <g0>) + N(0, sigma^2), unclipped and unrounded after the
// Gaussian term. Noiseless sentinel: g = g0 (+ Gaussian if sigma > 0).
Measurement measure(const RealField& phase, const OpticalConfig& config,
                    const NoiseModel& noise, RngStream& rng);

// The Poisson argument p g0 / <g0>; its mean is p.
RealField poisson_rate(const RealField& g0, double photons);

}  // namespace lsdnn

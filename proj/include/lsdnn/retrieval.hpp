#pragma once

#include <vector>

#include "lsdnn/field.hpp"
#include "lsdnn/optics.hpp"

namespace lsdnn {

// Gerchberg-Saxton state. residuals[k] is the measurement-plane misfit
// || |F_z exp(i f[k])| - sqrt(g) ||_2 of the k-th iterate.
struct GsState {
  RealField phase;
  int iteration = 0;
  std::vector<double> residuals;
};

// Starting state f[0] = 0 for the given measurement.
GsState gs_initial(const RealField& g, const OpticalConfig& config);

// One iterate: f[k+1] = arg F_z^-1( sqrt(g) exp(i arg F_z exp(i f[k])) ).
// Negative g pixels are clamped to zero before the square root.
GsState gs_iterate(const GsState& state, const RealField& g, const OpticalConfig& config);

GsState gs_solve(const RealField& g, const OpticalConfig& config, int iterations);

// Single GS iterate from the uniform field 1; values in (-pi, pi].
RealField approximant(const RealField& g, const OpticalConfig& config);

// std::arg mapped into (-pi, pi].
double principal_arg(Complex v);

}  // namespace lsdnn

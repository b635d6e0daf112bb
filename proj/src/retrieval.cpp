#include "lsdnn/retrieval.hpp"

#include <cmath>
#include <numbers>

namespace lsdnn {

namespace {

std::vector<double> clamped_sqrt(const RealField& g) {
  require_finite(g.values, "measurement");
  std::vector<double> amp(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) amp[i] = std::sqrt(std::max(g.values[i], 0.0));
  return amp;
}

double modulus_residual(const ComplexField& detector, const std::vector<double>& amp) {
  double s = 0.0;
  for (std::size_t i = 0; i < amp.size(); ++i) {
    const double d = std::abs(detector.values[i]) - amp[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// arg F_z^-1( amp * exp(i arg detector) )
RealField replace_modulus_and_return(const ComplexField& detector,
                                     const std::vector<double>& amp,
                                     const OpticalConfig& config) {
  ComplexField constrained(detector.grid);
  for (std::size_t i = 0; i < amp.size(); ++i)
    constrained.values[i] = std::polar(amp[i], principal_arg(detector.values[i]));
  const ComplexField object = back_propagate(constrained, config);
  RealField phase(object.grid);
  for (std::size_t i = 0; i < phase.size(); ++i) phase.values[i] = principal_arg(object.values[i]);
  return phase;
}

}  // namespace

double principal_arg(Complex v) {
  const double a = std::arg(v);
  return a <= -std::numbers::pi ? std::numbers::pi : a;
}

GsState gs_initial(const RealField& g, const OpticalConfig& config) {
  require_same_grid(g.grid, config.grid, "gs_initial");
  const std::vector<double> amp = clamped_sqrt(g);
  GsState state;
  state.phase = RealField(g.grid, 0.0);
  state.iteration = 0;
  state.residuals.push_back(modulus_residual(propagate(phase_to_field(state.phase), config), amp));
  return state;
}

GsState gs_iterate(const GsState& state, const RealField& g, const OpticalConfig& config) {
  require_same_grid(g.grid, config.grid, "gs_iterate");
  require_same_grid(state.phase.grid, config.grid, "gs_iterate");
  const std::vector<double> amp = clamped_sqrt(g);

  const ComplexField detector = propagate(phase_to_field(state.phase), config);
  GsState next;
  next.phase = replace_modulus_and_return(detector, amp, config);
  next.iteration = state.iteration + 1;
  next.residuals = state.residuals;
  next.residuals.push_back(modulus_residual(propagate(phase_to_field(next.phase), config), amp));
  return next;
}

GsState gs_solve(const RealField& g, const OpticalConfig& config, int iterations) {
  if (iterations < 1) throw UsageError("gs iterations must be >= 1");
  GsState state = gs_initial(g, config);
  for (int k = 0; k < iterations; ++k) state = gs_iterate(state, g, config);
  return state;
}

RealField approximant(const RealField& g, const OpticalConfig& config) {
  require_same_grid(g.grid, config.grid, "approximant");
  const std::vector<double> amp = clamped_sqrt(g);
  const ComplexField uniform(g.grid, Complex(1.0, 0.0));
  return replace_modulus_and_return(propagate(uniform, config), amp, config);
}

}  // namespace lsdnn

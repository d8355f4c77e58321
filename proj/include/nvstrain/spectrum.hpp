#pragma once

// Forward model of the zero-field CW-ODMR spectrum of a strained NV- center:
// two Lorentzian dips at nu_+- weighted by the microwave transition rates.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "nvstrain/spin_core.hpp"

namespace nvstrain {

// How phi_mw and phi_str combine inside the transition rates.
enum class PhaseConvention {
  Sum,         // 2 phi_mw + phi_str (default)
  Difference,  // 2 phi_mw - phi_str
};

struct SpectrumModel {
  double d = kZeroFieldSplittingGHz;
  StrainAmplitudes amps;
  double phi_mw = 0.0;   // rad, microwave field vs NV x axis
  double gamma = 5e-3;   // GHz, HWHM
  double a = 1e-3;       // contrast amplitude; a / gamma is the full dip depth
  double baseline = 1.0;
  PhaseConvention convention = PhaseConvention::Sum;

  // Throws InvalidArgument unless gamma > 0, a > 0 and a / gamma <= baseline.
  void validate() const;
  // a / gamma.
  double peak_depth() const { return a / gamma; }
};

// Ordered frequency / PL samples with optional per-point sigma.
struct SpectrumSamples {
  std::vector<double> nu;  // GHz, strictly increasing
  std::vector<double> pl;
  std::vector<double> sigma;  // empty or same length as nu

  std::size_t size() const { return nu.size(); }
  // Throws InvalidArgument on length mismatch, non-increasing frequencies,
  // non-finite PL or non-positive sigma.
  void validate() const;
};

struct StrainMetrics {
  double shift = 0.0;      // GHz
  double splitting = 0.0;  // GHz
  double imbalance = 0.0;  // 0 when degenerate
  bool degenerate = false; // m_x = m_y = 0, imbalance undefined
};

struct TransitionFrequencies {
  double nu_minus = 0.0;
  double nu_plus = 0.0;
};

struct TransitionAmplitudes {
  double alpha_plus = 0.0;
  double alpha_minus = 0.0;
};

TransitionFrequencies transition_frequencies(double d,
                                             const StrainAmplitudes& amps);

// alpha_+- = (1 +- cos(2 phi_mw +- phi_str)) / 2.
TransitionAmplitudes transition_amplitudes(
    double phi_mw, double phi_str,
    PhaseConvention convention = PhaseConvention::Sum);

// gamma / (nu^2 + gamma^2). Peak 1/gamma.
double lorentzian(double nu, double gamma);

// Evenly spaced grid, default d +- 0.03 GHz with 601 points.
std::vector<double> default_grid(double center = kZeroFieldSplittingGHz,
                                 double half_span = 0.03,
                                 std::size_t points = 601);
std::vector<double> linear_grid(double start, double stop, std::size_t points);

// pl(nu) = baseline - a [alpha_+ L(nu - nu_+) + alpha_- L(nu - nu_-)].
// With m_x = m_y = 0 a single dip of unit weight sits at d + m_z.
SpectrumSamples synthesize(const SpectrumModel& model,
                           std::span<const double> grid);

StrainMetrics metrics(const SpectrumModel& model);

// Dip weights actually used by synthesize (1/0 split irrelevant when
// degenerate; reported as 0.5/0.5 there).
TransitionAmplitudes model_amplitudes(const SpectrumModel& model);

}  // namespace nvstrain

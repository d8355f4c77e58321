#include "nvstrain/spectrum.hpp"

#include <cmath>

#include <fmt/format.h>

#include "nvstrain/error.hpp"

namespace nvstrain {

void SpectrumModel::validate() const {
  if (!std::isfinite(d) || !amps.is_finite() || !std::isfinite(phi_mw) ||
      !std::isfinite(baseline)) {
    throw InvalidArgument("spectrum model: non-finite parameter");
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidArgument(fmt::format("spectrum model: gamma must be > 0, got {}", gamma));
  }
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw InvalidArgument(fmt::format("spectrum model: amplitude must be > 0, got {}", a));
  }
  if (a / gamma > baseline) {
    throw InvalidArgument(fmt::format(
        "spectrum model: dip depth a/gamma = {} exceeds baseline {}", a / gamma,
        baseline));
  }
}

void SpectrumSamples::validate() const {
  if (nu.size() != pl.size()) {
    throw InvalidArgument("spectrum samples: frequency and PL lengths differ");
  }
  if (!sigma.empty() && sigma.size() != nu.size()) {
    throw InvalidArgument("spectrum samples: sigma length differs");
  }
  for (std::size_t i = 0; i < nu.size(); ++i) {
    if (!std::isfinite(nu[i]) || !std::isfinite(pl[i])) {
      throw InvalidArgument(fmt::format("spectrum samples: non-finite value at index {}", i));
    }
    if (i > 0 && !(nu[i] > nu[i - 1])) {
      throw InvalidArgument(fmt::format(
          "spectrum samples: frequencies not strictly increasing at index {}", i));
    }
    if (!sigma.empty() && !(sigma[i] > 0.0 && std::isfinite(sigma[i]))) {
      throw InvalidArgument(fmt::format("spectrum samples: sigma must be > 0 at index {}", i));
    }
  }
}

TransitionFrequencies transition_frequencies(double d,
                                             const StrainAmplitudes& amps) {
  const double center = d + amps.m_z;
  const double perp = amps.transverse();
  return {center - perp, center + perp};
}

TransitionAmplitudes transition_amplitudes(double phi_mw, double phi_str,
                                           PhaseConvention convention) {
  const double arg = convention == PhaseConvention::Sum ? 2.0 * phi_mw + phi_str
                                                        : 2.0 * phi_mw - phi_str;
  const double c = std::cos(arg);
  return {0.5 * (1.0 + c), 0.5 * (1.0 - c)};
}

double lorentzian(double nu, double gamma) {
  return gamma / (nu * nu + gamma * gamma);
}

std::vector<double> linear_grid(double start, double stop, std::size_t points) {
  if (points < 2 || !(stop > start)) {
    throw InvalidArgument("grid: need stop > start and at least two points");
  }
  std::vector<double> g(points);
  const double step = (stop - start) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = start + step * static_cast<double>(i);
  }
  g.back() = stop;
  return g;
}

std::vector<double> default_grid(double center, double half_span,
                                 std::size_t points) {
  return linear_grid(center - half_span, center + half_span, points);
}

TransitionAmplitudes model_amplitudes(const SpectrumModel& model) {
  const auto phi_str = strain_phase(model.amps);
  if (!phi_str) return {0.5, 0.5};
  return transition_amplitudes(model.phi_mw, *phi_str, model.convention);
}

SpectrumSamples synthesize(const SpectrumModel& model,
                           std::span<const double> grid) {
  model.validate();
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw InvalidArgument("synthesize: grid must be strictly increasing");
    }
  }
  SpectrumSamples out;
  out.nu.assign(grid.begin(), grid.end());
  out.pl.resize(grid.size());

  const auto freqs = transition_frequencies(model.d, model.amps);
  const auto phi_str = strain_phase(model.amps);
  if (!phi_str) {
    const double center = model.d + model.amps.m_z;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out.pl[i] = model.baseline - model.a * lorentzian(grid[i] - center, model.gamma);
    }
    return out;
  }
  const auto alpha = transition_amplitudes(model.phi_mw, *phi_str, model.convention);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double dip = alpha.alpha_plus * lorentzian(grid[i] - freqs.nu_plus, model.gamma) +
                       alpha.alpha_minus * lorentzian(grid[i] - freqs.nu_minus, model.gamma);
    out.pl[i] = model.baseline - model.a * dip;
  }
  return out;
}

StrainMetrics metrics(const SpectrumModel& model) {
  StrainMetrics m;
  m.shift = model.amps.m_z;
  m.splitting = 2.0 * model.amps.transverse();
  const auto phi_str = strain_phase(model.amps);
  if (!phi_str) {
    m.degenerate = true;
    m.imbalance = 0.0;
    return m;
  }
  const auto alpha = transition_amplitudes(model.phi_mw, *phi_str, model.convention);
  m.imbalance = (alpha.alpha_plus - alpha.alpha_minus) /
                (alpha.alpha_plus + alpha.alpha_minus);
  return m;
}

}  // namespace nvstrain

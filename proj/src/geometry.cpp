#include "nvstrain/geometry.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "nvstrain/error.hpp"

namespace nvstrain {

namespace {

struct AxisAngles {
  double theta_deg;
  double phi_deg;
};

// Symmetry-axis angles of the four orientations.
constexpr std::array<AxisAngles, 4> kAxisAngles{{
    {123.14, 254.14},
    {53.98, 162.81},
    {126.64, 72.75},
    {57.80, 343.79},
}};

}  // namespace

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

Vector3d nv_axis(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
          std::cos(theta)};
}

std::pair<Vector3d, Vector3d> dipoles(double theta, double phi) {
  Vector3d d1(-std::sin(phi), std::cos(phi), 0.0);
  Vector3d d2(std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi),
              -std::sin(theta));
  return {d1, d2};
}

NvOrientation standard_orientation(int index) {
  if (index < 1 || index > 4) {
    throw InvalidArgument(
        fmt::format("NV orientation index must be 1..4, got {}", index));
  }
  const auto& a = kAxisAngles[static_cast<std::size_t>(index - 1)];
  const double theta = deg_to_rad(a.theta_deg);
  const double phi = deg_to_rad(a.phi_deg);
  NvOrientation o;
  o.index = index;
  o.theta_deg = a.theta_deg;
  o.phi_deg = a.phi_deg;
  o.e_nv = nv_axis(theta, phi);
  auto [d1, d2] = dipoles(theta, phi);
  o.d2 = d2;
  // Tabulated d1 points opposite to the phi-hat direction.
  o.d1 = -d1;
  return o;
}

std::array<NvOrientation, 4> standard_orientations() {
  return {standard_orientation(1), standard_orientation(2),
          standard_orientation(3), standard_orientation(4)};
}

double readout_fidelity(double contrast, double n_avg) {
  if (!(contrast >= 0.0 && contrast <= 1.0)) {
    throw InvalidArgument(
        fmt::format("contrast must lie in [0, 1], got {}", contrast));
  }
  if (!(n_avg >= 0.0) || !std::isfinite(n_avg)) {
    throw InvalidArgument(
        fmt::format("n_avg must be finite and >= 0, got {}", n_avg));
  }
  const double cn = contrast * std::sqrt(n_avg);
  return cn / std::sqrt(contrast * contrast * n_avg + 1.0);
}

std::vector<FidelityPoint> fidelity_curve(double contrast,
                                          std::span<const double> n_grid) {
  std::vector<FidelityPoint> out;
  out.reserve(n_grid.size());
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (i > 0 && n_grid[i] < n_grid[i - 1]) {
      throw InvalidArgument("fidelity_curve: n grid must be ascending");
    }
    out.push_back({n_grid[i], contrast, readout_fidelity(contrast, n_grid[i])});
  }
  return out;
}

std::vector<double> log_grid(double lo, double hi, int n_points) {
  if (!(lo > 0.0) || !(hi >= lo) || n_points < 1) {
    throw InvalidArgument("log_grid: need 0 < lo <= hi and n_points >= 1");
  }
  std::vector<double> out(static_cast<std::size_t>(n_points));
  if (n_points == 1) {
    out[0] = lo;
    return out;
  }
  const double step = std::log(hi / lo) / (n_points - 1);
  for (int i = 0; i < n_points; ++i) {
    out[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  }
  out.back() = hi;
  return out;
}

}  // namespace nvstrain

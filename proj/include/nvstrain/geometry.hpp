#pragma once

// NV symmetry-axis and optical-dipole geometry in the lab frame, plus the
// single-shot photon readout fidelity.

#include <array>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace nvstrain {

using Vector3d = Eigen::Vector3d;

double deg_to_rad(double deg);
double rad_to_deg(double rad);

struct NvOrientation {
  int index = 0;          // 1..4
  Vector3d e_nv;          // symmetry axis
  Vector3d d1;            // in-plane dipole, oriented so that d1 x d2 = e_nv
  Vector3d d2;            // dipole in the (e_nv, z) plane
  double theta_deg = 0.0;
  double phi_deg = 0.0;
};

// (sin t cos p, sin t sin p, cos t).
Vector3d nv_axis(double theta, double phi);

// d1 = (-sin p, cos p, 0), d2 = (cos t cos p, cos t sin p, -sin t). At the
// poles d1 is still fixed by the supplied phi.
std::pair<Vector3d, Vector3d> dipoles(double theta, double phi);

// The four NV orientations of a [100]-surface diamond.
std::array<NvOrientation, 4> standard_orientations();

// Throws InvalidArgument unless 1 <= index <= 4.
NvOrientation standard_orientation(int index);

struct FidelityPoint {
  double n_avg = 0.0;
  double contrast = 0.0;
  double fidelity = 0.0;
};

// C sqrt(n) / sqrt(C^2 n + 1). Throws InvalidArgument for contrast outside
// [0, 1] or negative / non-finite n_avg.
double readout_fidelity(double contrast, double n_avg);

// Pointwise readout_fidelity over an ascending, non-negative grid.
std::vector<FidelityPoint> fidelity_curve(double contrast,
                                          std::span<const double> n_grid);

// n_points values spaced logarithmically between lo and hi inclusive.
std::vector<double> log_grid(double lo, double hi, int n_points);

}  // namespace nvstrain

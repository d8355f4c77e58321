#pragma once

// Strain tensors, spin-strain coupling constants and the mapping from a
// tensor in the NV frame to the five spin-strain amplitudes.

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "nvstrain/geometry.hpp"
#include "nvstrain/spin_core.hpp"

namespace nvstrain {

using Matrix3d = Eigen::Matrix3d;

enum class Frame { NV, Lab };

// Symmetric strain tensor; only the six independent tensor components are
// stored. Shears are tensor shears eps_ij, not engineering shears 2 eps_ij.
struct StrainTensor {
  double e_xx = 0.0;
  double e_yy = 0.0;
  double e_zz = 0.0;
  double e_xy = 0.0;
  double e_xz = 0.0;
  double e_yz = 0.0;
  Frame frame = Frame::NV;

  Matrix3d matrix() const;
  double trace() const { return e_xx + e_yy + e_zz; }
  bool is_finite() const;

  static StrainTensor from_matrix(const Matrix3d& m, Frame frame);
};

inline constexpr double kStrainWarnLimit = 1e-2;

// Warns when any component reaches kStrainWarnLimit in magnitude.
std::optional<std::string> strain_warning(const StrainTensor& eps);

struct CouplingUncertainties {
  double h41 = 0.0;
  double h43 = 0.0;
  double h15 = 0.0;
  double h16 = 0.0;
  double h25 = 0.0;
  double h26 = 0.0;
};

// GHz per unit strain.
struct CouplingConstants {
  double h41 = 0.0;
  double h43 = 0.0;
  double h15 = 0.0;
  double h16 = 0.0;
  double h25 = 0.0;
  double h26 = 0.0;
  std::optional<CouplingUncertainties> uncertainties;
};

// Published central values with their quoted 1-sigma uncertainties.
CouplingConstants default_couplings();

// Mz = h41(exx + eyy) + h43 ezz
// Mx = 1/2 [h16 exz - 1/2 h15 (exx - eyy)]
// My = 1/2 [h16 eyz + h15 exy]
// Nx = 1/2 [h26 exz - 1/2 h25 (exx - eyy)]
// Ny = 1/2 [h26 eyz + h25 exy]
// Throws InvalidArgument for a lab-frame tensor.
StrainAmplitudes amplitudes_from_tensor(const StrainTensor& eps,
                                        const CouplingConstants& c);

// Rotation taking lab-frame vectors into an NV frame. Rows are the NV-frame
// axes expressed in lab coordinates: x along the d2 dipole, z along e_nv,
// y = z cross x.
struct NvFrame {
  int index = 0;
  Matrix3d rotation = Matrix3d::Identity();

  static NvFrame from_orientation(const NvOrientation& o);
  static NvFrame standard(int index);
};

// eps' = R eps R^T. Throws InvalidArgument if eps is already in the NV frame
// or the rotation is not proper orthogonal within 1e-10.
StrainTensor rotate_to_nv_frame(const StrainTensor& eps, const NvFrame& f);

namespace scenario {

// Total volumetric strain split equally across the diagonal.
StrainTensor volumetric(double eps);
StrainTensor shear_yz(double e_yz);
StrainTensor shear_xy(double e_xx, double e_yy, double e_xy);

}  // namespace scenario

}  // namespace nvstrain

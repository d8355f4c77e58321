#include "nvstrain/strain_model.hpp"

#include <cmath>

#include <fmt/format.h>

#include "nvstrain/error.hpp"

namespace nvstrain {

Matrix3d StrainTensor::matrix() const {
  Matrix3d m;
  // clang-format off
  m << e_xx, e_xy, e_xz,
       e_xy, e_yy, e_yz,
       e_xz, e_yz, e_zz;
  // clang-format on
  return m;
}

bool StrainTensor::is_finite() const { return matrix().allFinite(); }

StrainTensor StrainTensor::from_matrix(const Matrix3d& m, Frame frame) {
  // Average the off-diagonal pairs to keep the result exactly symmetric.
  return {m(0, 0),
          m(1, 1),
          m(2, 2),
          0.5 * (m(0, 1) + m(1, 0)),
          0.5 * (m(0, 2) + m(2, 0)),
          0.5 * (m(1, 2) + m(2, 1)),
          frame};
}

std::optional<std::string> strain_warning(const StrainTensor& eps) {
  const double biggest = eps.matrix().cwiseAbs().maxCoeff();
  if (biggest >= kStrainWarnLimit) {
    return fmt::format("strain component magnitude {} exceeds {}", biggest,
                       kStrainWarnLimit);
  }
  return std::nullopt;
}

CouplingConstants default_couplings() {
  CouplingConstants c;
  c.h41 = -6.42;
  c.h43 = 2.3;
  c.h15 = 5.7;
  c.h16 = 19.66;
  c.h25 = -2.6;
  c.h26 = -2.83;
  c.uncertainties = CouplingUncertainties{0.09, 0.2, 0.2, 0.09, 0.08, 0.07};
  return c;
}

StrainAmplitudes amplitudes_from_tensor(const StrainTensor& eps,
                                        const CouplingConstants& c) {
  if (eps.frame != Frame::NV) {
    throw InvalidArgument(
        "amplitudes_from_tensor: tensor is in the lab frame; rotate it to the "
        "NV frame first");
  }
  if (!eps.is_finite()) {
    throw InvalidArgument("amplitudes_from_tensor: non-finite strain");
  }
  const double aniso = eps.e_xx - eps.e_yy;
  StrainAmplitudes a;
  a.m_z = c.h41 * (eps.e_xx + eps.e_yy) + c.h43 * eps.e_zz;
  a.m_x = 0.5 * (c.h16 * eps.e_xz - 0.5 * c.h15 * aniso);
  a.m_y = 0.5 * (c.h16 * eps.e_yz + c.h15 * eps.e_xy);
  a.n_x = 0.5 * (c.h26 * eps.e_xz - 0.5 * c.h25 * aniso);
  a.n_y = 0.5 * (c.h26 * eps.e_yz + c.h25 * eps.e_xy);
  return a;
}

NvFrame NvFrame::from_orientation(const NvOrientation& o) {
  const Vector3d z = o.e_nv.normalized();
  // Project d2 onto the plane normal to z and renormalize.
  Vector3d x = o.d2 - o.d2.dot(z) * z;
  x.normalize();
  const Vector3d y = z.cross(x);
  NvFrame f;
  f.index = o.index;
  f.rotation.row(0) = x.transpose();
  f.rotation.row(1) = y.transpose();
  f.rotation.row(2) = z.transpose();
  return f;
}

NvFrame NvFrame::standard(int index) {
  return from_orientation(standard_orientation(index));
}

StrainTensor rotate_to_nv_frame(const StrainTensor& eps, const NvFrame& f) {
  if (eps.frame != Frame::Lab) {
    throw InvalidArgument("rotate_to_nv_frame: tensor is already in the NV frame");
  }
  const Matrix3d& r = f.rotation;
  const double ortho = (r * r.transpose() - Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-10 || std::abs(r.determinant() - 1.0) > 1e-10) {
    throw InvalidArgument("rotate_to_nv_frame: rotation is not proper orthogonal");
  }
  return StrainTensor::from_matrix(r * eps.matrix() * r.transpose(), Frame::NV);
}

namespace scenario {

StrainTensor volumetric(double eps) {
  const double part = eps / 3.0;
  return {part, part, part, 0.0, 0.0, 0.0, Frame::NV};
}

StrainTensor shear_yz(double e_yz) {
  StrainTensor t;
  t.e_yz = e_yz;
  return t;
}

StrainTensor shear_xy(double e_xx, double e_yy, double e_xy) {
  StrainTensor t;
  t.e_xx = e_xx;
  t.e_yy = e_yy;
  t.e_xy = e_xy;
  return t;
}

}  // namespace scenario

}  // namespace nvstrain

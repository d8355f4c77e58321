#include "nvstrain/spin_core.hpp"

#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "nvstrain/error.hpp"

namespace nvstrain {

namespace {

using cd = std::complex<double>;

// Rotate the global phase so the largest-magnitude component is real positive.
Vector3c fix_phase(const Vector3c& v) {
  const double peak = v.cwiseAbs().maxCoeff();
  int best = 0;
  while (std::abs(v(best)) < peak - 1e-12) ++best;
  const double best_mag = std::abs(v(best));
  if (best_mag == 0.0) return v;
  const cd phase = std::conj(v(best)) / best_mag;
  Vector3c out = v * phase;
  out(best) = cd(std::abs(out(best)), 0.0);
  return out;
}

}  // namespace

bool StrainAmplitudes::is_finite() const {
  return std::isfinite(m_z) && std::isfinite(m_x) && std::isfinite(m_y) &&
         std::isfinite(n_x) && std::isfinite(n_y);
}

double StrainAmplitudes::transverse() const { return std::hypot(m_x, m_y); }

StrainAmplitudes StrainAmplitudes::operator+(const StrainAmplitudes& o) const {
  return {m_z + o.m_z, m_x + o.m_x, m_y + o.m_y, n_x + o.n_x, n_y + o.n_y};
}

StrainAmplitudes StrainAmplitudes::operator*(double s) const {
  return {m_z * s, m_x * s, m_y * s, n_x * s, n_y * s};
}

std::optional<std::string> amplitude_warning(const StrainAmplitudes& amps) {
  const std::array<std::pair<const char*, double>, 5> fields{{{"m_z", amps.m_z},
                                                              {"m_x", amps.m_x},
                                                              {"m_y", amps.m_y},
                                                              {"n_x", amps.n_x},
                                                              {"n_y", amps.n_y}}};
  for (const auto& [name, value] : fields) {
    if (std::abs(value) > kAmplitudeWarnGHz) {
      return fmt::format("strain amplitude {} = {} GHz exceeds {} GHz", name,
                         value, kAmplitudeWarnGHz);
    }
  }
  return std::nullopt;
}

SpinOperatorSet spin1_matrices() {
  const double r = 1.0 / std::sqrt(2.0);
  const cd i(0.0, 1.0);
  SpinOperatorSet s;
  // clang-format off
  s.sx << 0.0, r,   0.0,
          r,   0.0, r,
          0.0, r,   0.0;
  s.sy << 0.0,   -i * r, 0.0,
          i * r, 0.0,    -i * r,
          0.0,   i * r,  0.0;
  s.sz << 1.0, 0.0, 0.0,
          0.0, 0.0, 0.0,
          0.0, 0.0, -1.0;
  // clang-format on
  return s;
}

Hamiltonian build_hamiltonian(double d, const StrainAmplitudes& amps) {
  if (!std::isfinite(d) || !amps.is_finite()) {
    throw InvalidArgument("build_hamiltonian: non-finite input");
  }
  const auto s = spin1_matrices();
  const Matrix3c sz2 = s.sz * s.sz;
  Matrix3c h = (d + amps.m_z) * sz2;
  h += amps.m_x * (s.sy * s.sy - s.sx * s.sx);
  h += amps.m_y * (s.sx * s.sy + s.sy * s.sx);
  h += amps.n_x * (s.sx * s.sz + s.sz * s.sx);
  h += amps.n_y * (s.sy * s.sz + s.sz * s.sy);
  return {h};
}

EigenSystem eigensystem(const Hamiltonian& h) {
  const Matrix3c& m = h.matrix;
  if (!m.allFinite()) throw InvalidArgument("eigensystem: non-finite matrix");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * scale) {
    throw InvalidArgument(
        fmt::format("eigensystem: matrix not Hermitian (deviation {:.3g})", asym));
  }
  // Symmetrize so the solver sees an exactly Hermitian input.
  const Matrix3c herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix3c> solver(herm);
  if (solver.info() != Eigen::Success) {
    throw InvalidArgument("eigensystem: decomposition failed");
  }
  EigenSystem out;
  for (int k = 0; k < 3; ++k) {
    out.energies[k] = solver.eigenvalues()(k);
    out.states[k] = fix_phase(solver.eigenvectors().col(k));
  }
  return out;
}

Levels analytic_levels(double d, const StrainAmplitudes& amps) {
  const double perp = amps.transverse();
  return {0.0, d + amps.m_z - perp, d + amps.m_z + perp};
}

std::optional<double> strain_phase(const StrainAmplitudes& amps) {
  if (amps.m_x == 0.0 && amps.m_y == 0.0) return std::nullopt;
  return std::atan2(amps.m_y, amps.m_x);
}

std::optional<std::array<Vector3c, 2>> analytic_strain_states(
    const StrainAmplitudes& amps) {
  const auto phi = strain_phase(amps);
  if (!phi) return std::nullopt;
  const double r = 1.0 / std::sqrt(2.0);
  const cd rel = std::polar(1.0, -*phi);
  Vector3c upper = Vector3c::Zero();
  Vector3c lower = Vector3c::Zero();
  upper(kPlusOne) = r;
  upper(kMinusOne) = -r * rel;
  lower(kPlusOne) = r;
  lower(kMinusOne) = r * rel;
  return std::array<Vector3c, 2>{fix_phase(upper), fix_phase(lower)};
}

std::array<double, 2> zero_field_esr(double d, double e) {
  return {d - std::abs(e), d + std::abs(e)};
}

}  // namespace nvstrain

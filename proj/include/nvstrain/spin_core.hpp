#pragma once

// Spin-1 operator algebra and the zero-field ground-state Hamiltonian of the
// NV- center under strain. Every matrix here is expressed in the ordered basis
// |+1>, |0>, |-1> and every energy is a frequency in GHz (H/h).

#include <array>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace nvstrain {

using Matrix3c = Eigen::Matrix3cd;
using Vector3c = Eigen::Vector3cd;

// Zero-field splitting of the NV- ground state.
inline constexpr double kZeroFieldSplittingGHz = 2.87;

// Amplitudes above this are unphysically large for a strained NV center.
inline constexpr double kAmplitudeWarnGHz = 0.5;

// Basis indices.
inline constexpr int kPlusOne = 0;
inline constexpr int kZero = 1;
inline constexpr int kMinusOne = 2;

struct SpinOperatorSet {
  Matrix3c sx;
  Matrix3c sy;
  Matrix3c sz;
};

// The five spin-strain frequencies (GHz).
struct StrainAmplitudes {
  double m_z = 0.0;
  double m_x = 0.0;
  double m_y = 0.0;
  double n_x = 0.0;
  double n_y = 0.0;

  bool is_finite() const;
  // sqrt(m_x^2 + m_y^2), the transverse strain magnitude.
  double transverse() const;

  StrainAmplitudes operator+(const StrainAmplitudes& o) const;
  StrainAmplitudes operator*(double s) const;
};

// Returns a warning message when any amplitude exceeds kAmplitudeWarnGHz.
std::optional<std::string> amplitude_warning(const StrainAmplitudes& amps);

// 3x3 Hermitian matrix in GHz, basis |+1>, |0>, |-1>.
struct Hamiltonian {
  Matrix3c matrix;
};

// Energies ascending (GHz), states paired column-wise with energies.
// Each state has its largest-magnitude component made real and positive
// (first such component when magnitudes tie).
struct EigenSystem {
  std::array<double, 3> energies{};
  std::array<Vector3c, 3> states;
};

struct Levels {
  double e0 = 0.0;
  double e_minus = 0.0;
  double e_plus = 0.0;
};

// Canonical spin-1 matrices in the |+1>, |0>, |-1> basis.
SpinOperatorSet spin1_matrices();

// d*Sz^2 + Mz Sz^2 + Mx(Sy^2 - Sx^2) + My{Sx,Sy} + Nx{Sx,Sz} + Ny{Sy,Sz}.
// Throws InvalidArgument on non-finite input.
Hamiltonian build_hamiltonian(double d, const StrainAmplitudes& amps);

// Numeric eigen-decomposition. Throws InvalidArgument when the input is not
// Hermitian within 1e-9 (scaled by the matrix magnitude) or not finite.
EigenSystem eigensystem(const Hamiltonian& h);

// Closed-form levels, ignoring n_x and n_y: e0 = 0, e_+- = d + m_z +- m_perp.
Levels analytic_levels(double d, const StrainAmplitudes& amps);

// atan2(m_y, m_x) in (-pi, pi]; nullopt when m_x = m_y = 0 (phase undefined).
std::optional<double> strain_phase(const StrainAmplitudes& amps);

// Closed-form |+> and |-> (first = upper level) of the transverse block when
// n_x = n_y = 0: |+-> = (|+1> -+ e^{-i phi_str}|-1>)/sqrt(2).
// Returns nullopt in the degenerate case.
std::optional<std::array<Vector3c, 2>> analytic_strain_states(
    const StrainAmplitudes& amps);

// Zero-bias ESR frequencies D +- E of the single-parameter model. The
// transverse magnitude sqrt(m_x^2 + m_y^2) plays the role of E when m_z = 0.
std::array<double, 2> zero_field_esr(double d, double e);

}  // namespace nvstrain

#pragma once

// Test-only reference computations kept independent of the library paths
// they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>

namespace oracle {

using cd = std::complex<double>;
using CMat = std::array<std::array<cd, 3>, 3>;

inline CMat mul(const CMat& a, const CMat& b) {
  CMat c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline CMat add(const CMat& a, const CMat& b, double sb = 1.0) {
  CMat c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c[i][j] = a[i][j] + sb * b[i][j];
  return c;
}

inline CMat scale(const CMat& a, double s) {
  CMat c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c[i][j] = a[i][j] * s;
  return c;
}

// Spin-1 matrices typed out by hand, basis |+1>, |0>, |-1>.
inline std::array<CMat, 3> spin1() {
  const double r = 1.0 / std::sqrt(2.0);
  const cd i(0.0, 1.0);
  CMat sx{{{0, r, 0}, {r, 0, r}, {0, r, 0}}};
  CMat sy{{{0, -i * r, 0}, {i * r, 0, -i * r}, {0, i * r, 0}}};
  CMat sz{{{1, 0, 0}, {0, 0, 0}, {0, 0, -1}}};
  return {sx, sy, sz};
}

// Direct term-by-term evaluation of the strained zero-field Hamiltonian.
inline CMat hamiltonian(double d, double mz, double mx, double my, double nx, double ny) {
  const auto [sx, sy, sz] = spin1();
  CMat h = scale(mul(sz, sz), d + mz);
  h = add(h, add(mul(sy, sy), mul(sx, sx), -1.0), mx);
  h = add(h, add(mul(sx, sy), mul(sy, sx)), my);
  h = add(h, add(mul(sx, sz), mul(sz, sx)), nx);
  h = add(h, add(mul(sy, sz), mul(sz, sy)), ny);
  return h;
}

// Real roots of det(H - lambda I) for Hermitian H, ascending. Closed-form
// trigonometric solution of the depressed cubic, then Newton polishing.
inline std::array<double, 3> char_poly_roots(const CMat& h) {
  const double a = h[0][0].real(), b = h[1][1].real(), c = h[2][2].real();
  const cd p = h[0][1], q = h[0][2], r = h[1][2];
  // lambda^3 - t lambda^2 + m lambda - det = 0
  const double t = a + b + c;
  const double m = a * b + b * c + a * c - std::norm(p) - std::norm(q) - std::norm(r);
  const double det = a * b * c + 2.0 * (p * r * std::conj(q)).real() - a * std::norm(r) -
                     b * std::norm(q) - c * std::norm(p);
  const double shift = t / 3.0;
  const double pp = m - t * t / 3.0;
  const double qq = -2.0 * t * t * t / 27.0 + t * m / 3.0 - det;
  std::array<double, 3> roots{};
  if (std::abs(pp) < 1e-300) {
    const double x = std::cbrt(-qq);
    roots = {x + shift, x + shift, x + shift};
  } else {
    const double rad = 2.0 * std::sqrt(-pp / 3.0);
    double arg = 3.0 * qq / (pp * rad);
    arg = std::clamp(arg, -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) {
      roots[k] = rad * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0) + shift;
    }
  }
  auto f = [&](double x) { return ((x - t) * x + m) * x - det; };
  auto df = [&](double x) { return (3.0 * x - 2.0 * t) * x + m; };
  for (auto& x : roots) {
    for (int it = 0; it < 8; ++it) {
      const double g = df(x);
      if (std::abs(g) < 1e-14) break;
      x -= f(x) / g;
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

}  // namespace oracle

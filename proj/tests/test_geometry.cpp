#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "nvstrain/error.hpp"
#include "nvstrain/geometry.hpp"

using namespace nvstrain;

namespace {

struct TableRow {
  Vector3d e_nv, d1, d2;
  double d1_theta, d1_phi, d2_theta, d2_phi;
};

// Cartesian components and dipole angles as printed (3 decimals).
const std::array<TableRow, 4> kTable{{
    {{-0.229, -0.805, -0.547}, {-0.962, 0.273, 0.0}, {0.149, 0.526, -0.837}, 90.0, 164.14, 146.86, 74.14},
    {{-0.773, 0.239, 0.588}, {0.296, 0.955, -0.0}, {-0.562, 0.174, -0.809}, 90.0, 72.81, 143.98, 162.81},
    {{0.238, 0.766, -0.597}, {0.955, -0.297, 0.0}, {-0.177, -0.57, -0.802}, 90.0, 342.75, 143.36, 252.75},
    {{0.813, -0.236, 0.533}, {-0.279, -0.96, 0.0}, {0.512, -0.149, -0.846}, 90.0, 253.79, 147.8, 343.79},
}};

Vector3d axis_deg(double theta, double phi) { return nv_axis(deg_to_rad(theta), deg_to_rad(phi)); }

}  // namespace

TEST_CASE("nv_axis") {
  CHECK((nv_axis(0.0, 1.234) - Vector3d(0, 0, 1)).norm() < 1e-15);
  CHECK((nv_axis(std::numbers::pi / 2, 0.0) - Vector3d(1, 0, 0)).norm() < 1e-15);
  const auto e = axis_deg(123.14, 254.14);
  CHECK((e - Vector3d(-0.229, -0.805, -0.547)).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(e.norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("dipoles follow the closed form") {
  SUBCASE("d2 of NV-4") {
    const auto [d1, d2] = dipoles(deg_to_rad(57.80), deg_to_rad(343.79));
    CHECK((d2 - Vector3d(0.512, -0.149, -0.846)).cwiseAbs().maxCoeff() < 2e-3);
  }
  SUBCASE("d1 = (-sin phi, cos phi, 0)") {
    const double phi = deg_to_rad(254.14);
    const auto [d1, d2] = dipoles(deg_to_rad(123.14), phi);
    CHECK((d1 - Vector3d(-std::sin(phi), std::cos(phi), 0.0)).norm() == 0.0);
  }
  SUBCASE("tabulated d1 direction from its own spherical angles") {
    CHECK((axis_deg(90.0, 164.14) - Vector3d(-0.962, 0.273, 0.0)).cwiseAbs().maxCoeff() < 1e-3);
  }
  SUBCASE("orthonormal for any angles") {
    for (int i = 0; i < 50; ++i) {
      const double t = 0.13 * i, p = 0.37 * i;
      const auto [d1, d2] = dipoles(t, p);
      const auto e = nv_axis(t, p);
      REQUIRE(std::abs(d1.dot(d2)) < 1e-15);
      REQUIRE(std::abs(d1.dot(e)) < 1e-15);
      REQUIRE(std::abs(d2.dot(e)) < 1e-15);
      REQUIRE(d1.norm() == doctest::Approx(1.0));
      REQUIRE(d2.norm() == doctest::Approx(1.0));
    }
  }
  SUBCASE("pole keeps the supplied phi") {
    const auto [d1, d2] = dipoles(0.0, std::numbers::pi / 2);
    CHECK((d1 - Vector3d(-1, 0, 0)).norm() < 1e-15);
  }
}

TEST_CASE("standard orientations reproduce the tabulated geometry") {
  const auto all = standard_orientations();
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& o = all[i];
    const auto& row = kTable[i];
    CAPTURE(i);
    CHECK(o.index == static_cast<int>(i) + 1);
    CHECK((o.e_nv - row.e_nv).cwiseAbs().maxCoeff() < 2e-3);
    CHECK((o.d1 - row.d1).cwiseAbs().maxCoeff() < 2e-3);
    CHECK((o.d2 - row.d2).cwiseAbs().maxCoeff() < 2e-3);
    // Dipole directions from their own tabulated angles.
    CHECK((axis_deg(row.d1_theta, row.d1_phi) - row.d1).cwiseAbs().maxCoeff() < 2e-3);
    CHECK((axis_deg(row.d2_theta, row.d2_phi) - row.d2).cwiseAbs().maxCoeff() < 2e-3);

    CHECK(std::abs(o.e_nv.norm() - 1.0) < 1e-6);
    CHECK(std::abs(o.d1.norm() - 1.0) < 1e-6);
    CHECK(std::abs(o.d2.norm() - 1.0) < 1e-6);
    CHECK(std::abs(o.d1.dot(o.d2)) < 1e-3);
    CHECK(std::abs(o.d1.dot(o.e_nv)) < 1e-3);
    CHECK(std::abs(o.d2.dot(o.e_nv)) < 1e-3);
    // Same checks on the printed vectors themselves.
    CHECK(std::abs(row.d1.dot(row.d2)) < 1e-3);
    CHECK(std::abs(row.d1.dot(row.e_nv)) < 1e-3);
    CHECK(std::abs(row.d2.dot(row.e_nv)) < 1e-3);

    // e x d1 parallel to d2 up to sign.
    CHECK(o.e_nv.cross(o.d1).cross(o.d2).norm() < 1e-3);
    CHECK((o.d1.cross(o.d2) - o.e_nv).norm() < 1e-12);
  }
  CHECK(all[0].theta_deg == 123.14);
  CHECK((all[1].e_nv - Vector3d(-0.773, 0.239, 0.588)).cwiseAbs().maxCoeff() < 1e-3);
  CHECK((all[2].d1 - Vector3d(0.955, -0.297, 0.0)).cwiseAbs().maxCoeff() < 1e-3);

  SUBCASE("near-tetrahedral axes") {
    // Printed axes deviate from 1/3 by up to 0.046.
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j) {
        CHECK(std::abs(std::abs(all[i].e_nv.dot(all[j].e_nv)) - 1.0 / 3.0) < 0.05);
        CHECK(std::abs(std::abs(kTable[i].e_nv.dot(kTable[j].e_nv)) - 1.0 / 3.0) < 0.05);
      }
  }
  CHECK_THROWS_AS(standard_orientation(0), InvalidArgument);
}

TEST_CASE("readout fidelity") {
  CHECK(readout_fidelity(0.3, 0.0) == 0.0);
  CHECK(readout_fidelity(0.0, 1e4) == 0.0);
  CHECK(std::abs(readout_fidelity(0.3, 10.0) - 0.6882) < 1e-4);
  CHECK(readout_fidelity(1.0, 1e6) > 1.0 - 1e-3);
  CHECK_THROWS_AS(readout_fidelity(1.2, 10.0), InvalidArgument);
  CHECK_THROWS_AS(readout_fidelity(-0.1, 10.0), InvalidArgument);
  CHECK_THROWS_AS(readout_fidelity(0.3, -1.0), InvalidArgument);

  SUBCASE("below one and linear for small C^2 n") {
    for (double c : {0.01, 0.05, 0.1, 0.3, 1.0})
      for (double n : {1e-3, 0.1, 1.0, 10.0, 1e3, 1e6}) {
        const double f = readout_fidelity(c, n);
        REQUIRE(f < 1.0);
        if (c * c * n < 0.01) REQUIRE(std::abs(f - c * std::sqrt(n)) <= 0.01 * c * std::sqrt(n));
      }
  }
}

TEST_CASE("fidelity curves") {
  const auto grid = log_grid(1.0, 1000.0, 60);
  CHECK(grid.front() == 1.0);
  CHECK(grid.back() == 1000.0);
  const auto hi = fidelity_curve(0.3, grid);
  const auto lo = fidelity_curve(0.1, grid);
  REQUIRE(hi.size() == grid.size());
  for (std::size_t i = 1; i < hi.size(); ++i) {
    CHECK(hi[i].fidelity > hi[i - 1].fidelity);
    CHECK(lo[i].fidelity > lo[i - 1].fidelity);
  }
  for (std::size_t i = 0; i < hi.size(); ++i) CHECK(hi[i].fidelity >= lo[i].fidelity);

  const std::vector<double> bad{1.0, 0.5};
  CHECK_THROWS_AS(fidelity_curve(0.3, bad), InvalidArgument);
  const std::vector<double> big{1e6};
  CHECK(fidelity_curve(1.0, big)[0].fidelity == doctest::Approx(1.0).epsilon(1e-3));
}

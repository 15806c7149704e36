#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "test_support.hpp"

using namespace vbsense;
using std::numbers::pi;

namespace {

beam::VectorField x_polarized_gaussian() {
  const double w = 1e-3;
  const double pitch = 12.0 * w / 256;
  const GridGeometry g(256, 256, pitch, pitch);
  beam::VectorField f;
  f.geometry = g;
  f.wavelength = 1550e-9;
  f.ex = beam::hermite_gauss_mode(0, 0, w, 1550e-9, 0.0, g);
  f.ey = Array2D<cplx>(g.nx, g.ny);
  return f;
}

}  // namespace

TEST_CASE("polarizer projection keeps eigenvectors and kills the orthogonal state") {
  const beam::VectorField f = x_polarized_gaussian();
  const beam::VectorField same = polarimetry::project(f, 0.0);
  for (std::size_t k = 0; k < f.ex.size(); ++k) CHECK(same.ex.data()[k] == f.ex.data()[k]);

  const beam::VectorField crossed = polarimetry::project(f, pi / 2);
  CHECK(crossed.power() < 1e-18);
}

TEST_CASE("projecting twice at the same angle is idempotent") {
  const beam::VectorField& f = testsup::radial_fixture();
  const double phi = 0.3;
  const beam::VectorField once = polarimetry::project(f, phi);
  const beam::VectorField twice = polarimetry::project(once, phi);
  for (std::size_t k = 0; k < f.ex.size(); ++k) {
    CHECK(std::abs(twice.ex.data()[k] - once.ex.data()[k]) < 1e-12);
    CHECK(std::abs(twice.ey.data()[k] - once.ey.data()[k]) < 1e-12);
  }
}

TEST_CASE("the radial mode transmits half its power through any polarizer") {
  const beam::VectorField& f = testsup::radial_fixture();
  for (const double phi : {0.0, pi / 4, pi / 2, 3 * pi / 4, 1.1}) {
    CHECK(polarimetry::project(f, phi).power() == Catch::Approx(0.5).epsilon(1e-6));
    CHECK(polarimetry::intensity(f, obstruction::Obstacle{}, phi) ==
          Catch::Approx(0.5).epsilon(1e-6));
  }
}

TEST_CASE("intensity behind a full-grid obstacle is zero") {
  const beam::VectorField& f = testsup::radial_fixture();
  const obstruction::Obstacle big(obstruction::Disk{2.0 * f.geometry.extent_x()}, {0, 0, 0}, 1.0);
  CHECK(polarimetry::intensity(f, big, 0.0) < 1e-15);
}

TEST_CASE("a centered vertical knife transmits a quarter of the H power") {
  const beam::VectorField& f = testsup::radial_fixture();
  const obstruction::Obstacle knife(obstruction::HalfPlane{}, {0, 0, 0});  // covers x > 0
  CHECK(polarimetry::intensity(f, knife, 0.0) == Catch::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("apply-then-project equals project-then-mask") {
  const beam::VectorField& f = testsup::radial_fixture();
  const obstruction::Obstacle o(obstruction::Disk{1.0e-3}, {0.5e-3, 0.3e-3, 0}, 1.35);
  for (const double phi : polarimetry::kChannelAngles) {
    const double a = polarimetry::project(obstruction::apply(o, f), phi).power();
    const double b = obstruction::apply(o, polarimetry::project(f, phi)).power();
    CHECK(std::abs(a - b) < 1e-9);
    CHECK(std::abs(a - polarimetry::intensity(f, o, phi)) < 1e-9);
  }
}

TEST_CASE("Stokes assembly from the four channel intensities") {
  const auto balanced = polarimetry::stokes_from_intensities(1, 1, 1, 1);
  CHECK(balanced.s0 == 2.0);
  CHECK(balanced.s1 == 0.0);
  CHECK(balanced.s2 == 0.0);

  const auto horizontal = polarimetry::stokes_from_intensities(1, 0, 0.5, 0.5);
  CHECK(horizontal.s0 == 1.0);
  CHECK(horizontal.s1 == 1.0);
  CHECK(horizontal.s2 == 0.0);

  const auto zero = polarimetry::stokes_from_intensities(0, 0, 0, 0);
  CHECK(zero.degenerate);

  // small negative from noise: clamped quietly; large negative: flagged
  const auto small_neg = polarimetry::stokes_from_intensities(1, -1e-8, 0.5, 0.5);
  CHECK(small_neg.reliable);
  CHECK(small_neg.s1 == Catch::Approx(1.0));
  const auto big_neg = polarimetry::stokes_from_intensities(1, -1e-3, 0.5, 0.5);
  CHECK_FALSE(big_neg.reliable);
}

TEST_CASE("Schmidt-path Stokes match the special cases") {
  beam::SchmidtDecomposition d;
  d.lambda1 = d.lambda2 = 0.5;
  d.u1 = {1.0, 0.0};
  auto ss = polarimetry::stokes_from_schmidt(d);
  CHECK(ss.stokes.s1 == 0.0);
  CHECK(ss.stokes.s2 == 0.0);
  CHECK(ss.s3 == 0.0);

  d.lambda1 = 0.7;
  d.lambda2 = 0.0;
  ss = polarimetry::stokes_from_schmidt(d);
  CHECK(ss.stokes.s0 == Catch::Approx(0.7));
  CHECK(ss.stokes.s1 == Catch::Approx(0.7));
  CHECK(ss.stokes.s2 == 0.0);
}

TEST_CASE("both Stokes computation paths agree on a masked field") {
  const beam::VectorField& f = testsup::radial_fixture();
  const obstruction::Obstacle o(obstruction::Bar{0.79e-3}, {0.1e-3, -0.2e-3, 0.6});
  const auto via_intensities =
      polarimetry::stokes_from_intensities(polarimetry::intensities(f, o));
  const auto via_schmidt =
      polarimetry::stokes_from_schmidt(beam::schmidt_decompose(obstruction::apply(o, f)));
  CHECK(std::abs(via_schmidt.stokes.s0 - via_intensities.s0) < 1e-6);
  CHECK(std::abs(via_schmidt.stokes.s1 - via_intensities.s1) < 1e-6);
  CHECK(std::abs(via_schmidt.stokes.s2 - via_intensities.s2) < 1e-6);

  // physicality of the raw triple
  CHECK(via_intensities.s1 * via_intensities.s1 + via_intensities.s2 * via_intensities.s2 <=
        via_intensities.s0 * via_intensities.s0 + 1e-9);
}

TEST_CASE("rotor bar sweeps a constant-radius circle in the (s1, s2) plane") {
  const beam::VectorField& f = testsup::radial_fixture(1.95e-3);
  const polarimetry::Tomography tomo = polarimetry::tomography(f);
  const int n = 24;
  double rmin = 1e300, rmax = 0;
  for (int k = 0; k < n; ++k) {
    const double th = pi * k / n;
    const obstruction::Obstacle bar(obstruction::Bar{0.79e-3}, {0, 0, th});
    const auto s = polarimetry::stokes_from_intensities(polarimetry::intensities(tomo, bar));
    const double r = std::hypot(s.s1, s.s2);
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    // pi-periodic: the same bar rotated by pi gives the same Stokes vector
    const auto s2 = polarimetry::stokes_from_intensities(
        polarimetry::intensities(tomo, bar.with_pose({0, 0, th + pi})));
    CHECK(std::abs(s2.s1 - s.s1) < 1e-9);
    CHECK(std::abs(s2.s2 - s.s2) < 1e-9);
  }
  CHECK((rmax - rmin) / (0.5 * (rmax + rmin)) < 1e-3);
}

TEST_CASE("a vertical knife edge never produces s2") {
  const beam::VectorField& f = testsup::radial_fixture(2.0e-3);
  const polarimetry::Tomography tomo = polarimetry::tomography(f);
  for (const double x0 : {-1.5e-3, -0.4e-3, 0.0, 0.3e-3, 1.2e-3}) {
    const obstruction::Obstacle knife(obstruction::HalfPlane{}, {x0, 0, 0});
    const auto s = polarimetry::stokes_from_intensities(polarimetry::intensities(tomo, knife));
    CHECK(std::abs(s.s2) < 1e-6);
  }
}

TEST_CASE("series normalization follows the plotting convention") {
  std::vector<polarimetry::StokesVector> series;
  polarimetry::StokesVector a;
  a.s0 = 2.0;
  a.s1 = 0.2;
  series.push_back(a);
  polarimetry::StokesVector b;
  b.s0 = 1.0;
  b.s1 = 0.5;
  series.push_back(b);
  polarimetry::StokesVector covered;
  covered.s0 = 1e-6;
  series.push_back(covered);

  const auto out = polarimetry::normalize(series);
  CHECK(out[0].s0 == Catch::Approx(1.0));
  CHECK(out[0].s1 == Catch::Approx(0.1));  // s1 / instantaneous raw s0
  CHECK(out[1].s0 == Catch::Approx(0.5));
  CHECK(out[1].s1 == Catch::Approx(0.5));
  CHECK_FALSE(out[2].reliable);
  CHECK(out[2].s1 == 0.0);

  std::vector<polarimetry::StokesVector> zero_first(1);
  CHECK_THROWS_AS(polarimetry::normalize(zero_first), std::domain_error);
}

TEST_CASE("Stokes CSV export writes the documented columns") {
  std::vector<polarimetry::StokesVector> series(2);
  series[0].s0 = 1.0;
  series[1].s0 = 0.5;
  series[1].reliable = false;
  const std::string path = testsup::scratch_file("stokes.csv");
  polarimetry::export_stokes_csv({0.0, 1e-9}, series, path, "unit test");
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "# unit test");
  std::getline(f, line);
  CHECK(line == "t_seconds,s0,s1,s2,reliability_flag");
  std::getline(f, line);
  CHECK(line == "0,1,0,0,1");
  std::getline(f, line);
  CHECK(line == "1.0000000000000001e-09,0.5,0,0,0");
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <numbers>

#include "test_support.hpp"

using namespace vbsense;
using std::numbers::pi;

namespace {

// LUT over +-1 mm around the axis for the standard sphere, cached
const tracking::LookupTable& small_lut() {
  static const tracking::LookupTable lut = [] {
    const polarimetry::Tomography tomo = polarimetry::tomography(testsup::radial_fixture());
    const obstruction::Obstacle sphere(obstruction::Disk{1.0e-3}, {0, 0, 0}, 1.35);
    return tracking::build_lut(tomo, sphere, tracking::LutGridSpec::centered(1e-3, 50e-6),
                               tracking::LutSource::ideal_mode);
  }();
  return lut;
}

sensing::TraceSet s0_trace(const std::vector<double>& s0, double dt = 1e-9) {
  sensing::TraceSet tr;
  tr.sample_period = dt;
  tr.channels = sensing::default_channels();
  for (auto& s : tr.samples) s.resize(s0.size());
  for (std::size_t k = 0; k < s0.size(); ++k)
    for (int c = 0; c < 4; ++c) tr.samples[c][k] = 0.5 * s0[k];
  return tr;
}

}  // namespace

TEST_CASE("LUT at the beam axis predicts vanishing s1 and s2") {
  const polarimetry::Tomography tomo = polarimetry::tomography(testsup::radial_fixture());
  const obstruction::Obstacle sphere(obstruction::Disk{1.0e-3}, {0, 0, 0}, 1.35);
  tracking::LutGridSpec grid;
  grid.nx = grid.ny = 5;
  grid.resolution = 250e-6;
  grid.x_min = grid.y_min = -625e-6;  // centers at 0, +-250, +-500 um
  const auto lut = tracking::build_lut(tomo, sphere, grid, tracking::LutSource::ideal_mode);
  const auto s = lut.stokes_at(2, 2);
  CHECK(std::abs(s.s1) < 1e-9 * s.s0);
  CHECK(std::abs(s.s2) < 1e-9 * s.s0);

  // a sphere displaced along +x shadows the horizontally polarized lobes
  const auto sx = lut.stokes_at(4, 2);
  CHECK(sx.s1 < -1e-4 * sx.s0);
  CHECK(std::abs(sx.s2) < 1e-9 * sx.s0);
}

TEST_CASE("LUT entries equal the direct forward model") {
  const polarimetry::Tomography tomo = polarimetry::tomography(testsup::radial_fixture());
  const tracking::LookupTable& lut = small_lut();
  for (const auto [i, j] : {std::pair{0, 0}, std::pair{17, 5}, std::pair{39, 39}}) {
    const obstruction::Pose p{lut.grid.x(i), lut.grid.y(j), 0};
    const auto direct = polarimetry::intensities(tomo, lut.shape.with_pose(p));
    for (int c = 0; c < 4; ++c)
      CHECK(lut.expected[c].at(i, j) == Catch::Approx(direct[c]).epsilon(1e-12));
  }
}

TEST_CASE("LUT construction validates grid and obstacle against the field extent") {
  const polarimetry::Tomography tomo = polarimetry::tomography(testsup::radial_fixture());
  const obstruction::Obstacle sphere(obstruction::Disk{1.0e-3}, {0, 0, 0}, 1.35);
  CHECK_THROWS_AS(tracking::build_lut(tomo, sphere, tracking::LutGridSpec::centered(1.0, 50e-6),
                                      tracking::LutSource::ideal_mode),
                  config_error);
  const obstruction::Obstacle huge(obstruction::Disk{1.0}, {0, 0, 0}, 1.35);
  CHECK_THROWS_AS(tracking::build_lut(tomo, huge, tracking::LutGridSpec::centered(1e-3, 50e-6),
                                      tracking::LutSource::ideal_mode),
                  config_error);
  tracking::LutGridSpec bad;
  CHECK_THROWS_AS(bad.validate(), config_error);
}

TEST_CASE("noiseless likelihood peaks at the true cell with a normalized posterior") {
  const tracking::LookupTable& lut = small_lut();
  const int ti = 12, tj = 27;
  const std::array<double, 4> sigma{1e-6, 1e-6, 1e-6, 1e-6};
  const auto post = tracking::likelihood(lut, lut.at(ti, tj), sigma);
  CHECK(post.map_i == ti);
  CHECK(post.map_j == tj);
  double total = 0;
  for (const double p : post.posterior) total += p;
  CHECK(total == Catch::Approx(1.0).epsilon(1e-9));
  CHECK(post.credible_mass >= 0.68);
  const bool map_in_region =
      std::find(post.credible_region.begin(), post.credible_region.end(),
                std::pair{ti, tj}) != post.credible_region.end();
  CHECK(map_in_region);
}

TEST_CASE("likelihood rejects non-positive noise") {
  const tracking::LookupTable& lut = small_lut();
  CHECK_THROWS_AS(tracking::likelihood(lut, lut.at(0, 0), {1e-6, 0, 1e-6, 1e-6}), config_error);
}

TEST_CASE("an off-axis sphere without prior yields a two-island degenerate posterior") {
  const tracking::LookupTable& lut = small_lut();
  // truth at (0.975, -0.025) mm: radius 0.975 mm > 0.3 * beam width
  const int ti = 39, tj = 19;
  REQUIRE(std::hypot(lut.grid.x(ti), lut.grid.y(tj)) > 0.3 * 2.84e-3);
  const std::array<double, 4> sigma{1e-6, 1e-6, 1e-6, 1e-6};
  const auto post = tracking::likelihood(lut, lut.at(ti, tj), sigma);
  CHECK(post.degenerate);
  // the mirror cell (-0.975, +0.025) mm belongs to the credible region too
  bool truth_in = false, ghost_in = false;
  for (const auto& [i, j] : post.credible_region) {
    if (i == ti && j == tj) truth_in = true;
    if (i == lut.grid.nx - 1 - ti && j == lut.grid.ny - 1 - tj) ghost_in = true;
  }
  CHECK(truth_in);
  CHECK(ghost_in);
}

TEST_CASE("an asymmetric measured tomography breaks the 180-degree ambiguity") {
  polarimetry::Tomography tomo = polarimetry::tomography(testsup::radial_fixture());
  const double w = 2.84e-3;
  for (int c = 0; c < 4; ++c)
    for (int j = 0; j < tomo.geometry.ny; ++j)
      for (int i = 0; i < tomo.geometry.nx; ++i) {
        const double x = tomo.geometry.x(i), y = tomo.geometry.y(j);
        tomo.images[c].at(i, j) *=
            1.0 + 0.02 * x / w + 0.02 * std::cos(4.0 * std::atan2(y, x));
      }
  tomo.recompute_totals();
  const auto lut =
      tracking::build_lut(tomo, small_lut().shape, small_lut().grid,
                          tracking::LutSource::measured_tomography);
  const int ti = 39, tj = 19;
  const std::array<double, 4> sigma{1e-6, 1e-6, 1e-6, 1e-6};
  const auto post = tracking::likelihood(lut, lut.at(ti, tj), sigma);
  CHECK_FALSE(post.degenerate);
  CHECK(post.map_i == ti);
  CHECK(post.map_j == tj);
}

TEST_CASE("a half-plane prior that excludes the truth locks onto the mirror ghost") {
  const tracking::LookupTable& lut = small_lut();
  const int ti = 39, tj = 19;
  tracking::PriorConfig prior;
  prior.initial_half_plane = tracking::PriorConfig::HalfPlanePrior{0, 0, pi};  // keep x <= 0
  const std::array<double, 4> sigma{1e-6, 1e-6, 1e-6, 1e-6};
  const auto pts =
      tracking::track(lut, {{0.0, lut.at(ti, tj)}}, sigma, prior);
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].x0 == Catch::Approx(-lut.grid.x(ti)).epsilon(1e-12));
  CHECK(pts[0].y0 == Catch::Approx(-lut.grid.y(tj)).epsilon(1e-12));
}

TEST_CASE("an infinite continuity scale reproduces the unconstrained MAP") {
  const tracking::LookupTable& lut = small_lut();
  const std::array<double, 4> sigma{1e-4, 1e-4, 1e-4, 1e-4};
  const std::vector<tracking::MeasuredSample> series{{0.0, lut.at(10, 20)},
                                                     {1.0, lut.at(12, 20)}};
  const auto unconstrained = tracking::track(lut, series, sigma);  // default: no priors
  const auto direct = tracking::likelihood(lut, series[1].intensities, sigma);
  CHECK(unconstrained[1].x0 == direct.map_x);
  CHECK(unconstrained[1].y0 == direct.map_y);
}

TEST_CASE("tracking a static noiseless object recovers its cell at every sample") {
  const tracking::LookupTable& lut = small_lut();
  const int ti = 25, tj = 14;
  const std::array<double, 4> sigma{1e-6, 1e-6, 1e-6, 1e-6};
  std::vector<tracking::MeasuredSample> series;
  for (int k = 0; k < 4; ++k) series.push_back({k * 1e-6, lut.at(ti, tj)});
  tracking::PriorConfig prior;
  prior.initial_half_plane =
      tracking::PriorConfig::HalfPlanePrior{0, 0, std::atan2(lut.grid.y(tj), lut.grid.x(ti))};
  prior.continuity_scale = 200e-6;
  const auto pts = tracking::track(lut, series, sigma, prior);
  for (const auto& p : pts) {
    CHECK(p.reliable);
    CHECK(p.x0 == Catch::Approx(lut.grid.x(ti)).epsilon(1e-12));
    CHECK(p.y0 == Catch::Approx(lut.grid.y(tj)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(tracking::track(lut, {}, sigma), config_error);
}

TEST_CASE("covered samples are flagged unreliable and carry the previous state") {
  const tracking::LookupTable& lut = small_lut();
  const std::array<double, 4> sigma{1e-6, 1e-6, 1e-6, 1e-6};
  const std::vector<tracking::MeasuredSample> series{
      {0.0, lut.at(10, 20)}, {1e-6, {0, 0, 0, 0}}, {2e-6, lut.at(10, 20)}};
  const auto pts = tracking::track(lut, series, sigma);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].reliable);
  CHECK_FALSE(pts[1].reliable);
  CHECK(pts[1].x0 == pts[0].x0);
  CHECK(pts[1].region_cell_count == pts[0].region_cell_count);
  CHECK(pts[2].reliable);

  const std::string path = testsup::scratch_file("track.csv");
  tracking::export_track_csv(pts, path, "prov");
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "# prov");
  std::getline(f, line);
  CHECK(line == "t,x0_hat,y0_hat,region_cell_count,degenerate_flag");
  std::getline(f, line);  // reliable row: all fields populated
  CHECK(line.find(",,") == std::string::npos);
  std::getline(f, line);  // covered row: empty estimate fields
  CHECK(line.find(",,,") != std::string::npos);
}

TEST_CASE("rotor angle inversion matches the quadrature law") {
  polarimetry::StokesVector s;
  s.s0 = 1;
  s.s1 = -0.2;
  s.s2 = 0;
  CHECK(tracking::rotor_angle(s, 0.2) == Catch::Approx(0.0).margin(1e-12));

  s.s1 = 0;
  s.s2 = -0.2;
  CHECK(tracking::rotor_angle(s, 0.2) == Catch::Approx(pi / 4).epsilon(1e-12));

  // equivariance across the full turn, pi-periodic output
  const double C = 0.2255;
  for (int k = 0; k < 16; ++k) {
    const double theta = 2 * pi * (k + 0.37) / 16;
    s.s1 = -C * std::cos(2 * theta);
    s.s2 = -C * std::sin(2 * theta);
    const double est = tracking::rotor_angle(s, C);
    CHECK(std::abs(std::remainder(est - theta, pi)) < 1e-12);
    CHECK(est >= 0);
    CHECK(est < pi + 1e-12);
  }

  s.s1 = 1e-4;
  s.s2 = 0;
  CHECK_THROWS_AS(tracking::rotor_angle(s, 0.2), degenerate_error);
  CHECK_THROWS_AS(tracking::rotor_angle(s, 0.0), config_error);
}

TEST_CASE("knife direction classification from the Stokes quadratures") {
  const int n = 100;
  auto make = [&](double a1, double a2) {
    std::vector<polarimetry::StokesVector> series;
    for (int k = 0; k < n; ++k) {
      polarimetry::StokesVector s;
      s.s0 = 1.0 - static_cast<double>(k) / (n - 1);
      const double bump = std::sin(pi * k / (n - 1.0));
      s.s1 = a1 * bump;
      s.s2 = a2 * bump;
      series.push_back(s);
    }
    return series;
  };

  const auto horizontal = tracking::knife_direction(make(0.3, 0.0));
  CHECK(horizontal.axis == tracking::MotionAxis::horizontal);
  CHECK(horizontal.ambiguous_180);
  CHECK_FALSE(horizontal.low_confidence);
  CHECK(horizontal.s2_energy < 0.05 * horizontal.s1_energy);

  const auto vertical = tracking::knife_direction(make(0.0, 0.3));
  CHECK(vertical.axis == tracking::MotionAxis::vertical);

  const auto diagonal = tracking::knife_direction(make(0.3, 0.29));
  CHECK(diagonal.low_confidence);

  CHECK_THROWS_AS(tracking::knife_direction({{}, {}}), degenerate_error);
  // constant series: no full transition
  std::vector<polarimetry::StokesVector> flat(50);
  for (auto& s : flat) s.s0 = 1.0;
  CHECK_THROWS_AS(tracking::knife_direction(flat), degenerate_error);
}

TEST_CASE("trigger finds no events on a constant trace") {
  const auto tr = s0_trace(std::vector<double>(200, 1.0));
  CHECK(tracking::trigger(tr, 0.3, 0.1).empty());
  CHECK_THROWS_AS(tracking::trigger(tr, 0.0, 0.0), config_error);
  CHECK_THROWS_AS(tracking::trigger(tr, 0.3, 0.3), config_error);
}

TEST_CASE("trigger brackets a single dip and separates two transits") {
  // long flat dip bottoms: disable the stationarity exit so the object's
  // full dwell stays one event
  tracking::TriggerOptions opt;
  opt.stationary_window = 200e-9;

  std::vector<double> dip(300, 1.0);
  for (int k = 100; k < 160; ++k) dip[k] = 0.2;
  const auto one = tracking::trigger(s0_trace(dip), 0.3, 0.1, opt);
  REQUIRE(one.size() == 1);
  CHECK(one[0].t_start > 90e-9);
  CHECK(one[0].t_end < 175e-9);
  CHECK(one[0].duration() > 40e-9);

  std::vector<double> two_dips(1400, 1.0);
  for (int k = 100; k < 160; ++k) two_dips[k] = 0.2;
  for (int k = 1100; k < 1160; ++k) two_dips[k] = 0.2;
  const auto two = tracking::trigger(s0_trace(two_dips), 0.3, 0.1, opt);
  REQUIRE(two.size() == 2);
  CHECK(two[1].t_start - two[0].t_end > 0.9e-6);

  // raising the threshold can only shrink the event window
  const auto tight = tracking::trigger(s0_trace(dip), 0.6, 0.1, opt);
  REQUIRE(tight.size() == 1);
  CHECK(tight[0].t_start >= one[0].t_start);
  CHECK(tight[0].duration() <= one[0].duration());
}

TEST_CASE("trigger closes an event when the signal settles at a covered level") {
  // ramp down to zero and stay there: the event must end at the plateau,
  // not at the end of the record
  std::vector<double> s0(400, 1.0);
  for (int k = 100; k < 140; ++k) s0[k] = 1.0 - (k - 100) / 40.0;
  for (int k = 140; k < 400; ++k) s0[k] = 0.0;
  const auto ev = tracking::trigger(s0_trace(s0), 0.3, 0.1);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].t_end < 200e-9);
}

TEST_CASE("LUT persistence round-trips exactly and detects corruption") {
  const tracking::LookupTable& lut = small_lut();
  const std::string path = testsup::scratch_file("lut.vbsa");
  tracking::save_lut(lut, path);
  const auto back = tracking::load_lut(path);
  CHECK(back.grid.nx == lut.grid.nx);
  CHECK(back.grid.ny == lut.grid.ny);
  CHECK(back.grid.x_min == lut.grid.x_min);
  CHECK(back.grid.y_min == lut.grid.y_min);
  CHECK(back.grid.resolution == lut.grid.resolution);
  CHECK(back.source == lut.source);
  CHECK(std::holds_alternative<obstruction::Disk>(back.shape.shape));
  CHECK(back.shape.diffraction_scale == lut.shape.diffraction_scale);
  for (int c = 0; c < 4; ++c)
    for (std::size_t k = 0; k < lut.expected[c].size(); ++k)
      CHECK(back.expected[c].data()[k] == lut.expected[c].data()[k]);

  // flip one payload byte: the integrity check must reject the file
  const std::string bad = testsup::scratch_file("lut_bad.vbsa");
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    bytes[bytes.size() - 100] ^= 0x01;
    std::ofstream out(bad, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_WITH(tracking::load_lut(bad), Catch::Matchers::ContainsSubstring("integrity"));
}

#pragma once

// The three bench scenarios (rotor rotation sensing, sphere position
// tracking, knife-edge transit) composed from the library modules. Shared
// between the CLI and the integration tests.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "vbsense/beam.hpp"
#include "vbsense/obstruction.hpp"
#include "vbsense/polarimetry.hpp"
#include "vbsense/sensing.hpp"
#include "vbsense/tracking.hpp"

namespace vbsense::scenarios {

using std::numbers::pi;

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t s = seed ^ (salt * 0x9E3779B97F4A7C15ull);
  return splitmix64(s);
}

// ---- rotor rotation sensing ----

struct RotorConfig {
  double bar_width = 0.79e-3;      ///< m
  double beam_width = 1.95e-3;     ///< 90-10 knife width, m
  double wavelength = 1550e-9;     ///< m
  int grid_n = 256;
  int n_angles = 360;              ///< poses over one full revolution
  double sample_period = 250e-12;  ///< s
  double window = 200e-9;          ///< integration window per pose, s
  double noise_sigma = 0.0;        ///< detector noise per sample, power units
  std::uint64_t seed = 0;
};

struct RotorResult {
  std::vector<double> theta_true;       ///< rad, in [0, 2 pi)
  std::vector<double> theta_est;        ///< rad, in [0, pi)
  std::vector<double> abs_error;        ///< rad, pi-periodic distance
  std::vector<polarimetry::StokesVector> stokes;  ///< raw, per pose
  double amplitude = 0;                 ///< calibrated (s1, s2) circle radius
  double mean_abs_error = 0, max_abs_error = 0;
  double radius_rel_spread = 0;         ///< (max - min) / mean of the radius
  int degenerate_poses = 0;             ///< poses with (s1, s2) below the noise floor
};

inline RotorResult run_rotor(const RotorConfig& cfg) {
  obstruction::Obstacle bar(obstruction::Bar{cfg.bar_width}, {0, 0, 0});
  if (cfg.n_angles < 2) throw config_error("rotor: n_angles must be >= 2");
  const double waist = beam::calibrate_radial_waist(cfg.beam_width, cfg.wavelength);
  const GridGeometry g = beam::default_geometry_for_width(cfg.beam_width, cfg.grid_n);
  const beam::VectorField field = beam::radial_mode(waist, cfg.wavelength, 0.0, g);
  const auto channels = sensing::default_channels(cfg.noise_sigma);

  RotorResult res;
  for (int k = 0; k < cfg.n_angles; ++k) {
    const double theta = 2.0 * pi * k / cfg.n_angles;
    const obstruction::Pose pose{0, 0, theta};
    const obstruction::Trajectory traj(
        {{0.0, pose}, {cfg.window * (1.0 + 1e-9), pose}});
    const sensing::TraceSet trace =
        sensing::synthesize(field, traj, bar, channels, cfg.sample_period, cfg.window,
                            derive_seed(cfg.seed, static_cast<std::uint64_t>(k)));
    const auto inten = sensing::integrate_window(trace, 0.0, cfg.window);
    res.theta_true.push_back(theta);
    res.stokes.push_back(polarimetry::stokes_from_intensities(inten));
  }

  double amp = 0;
  for (const auto& s : res.stokes) amp += std::hypot(s.s1, s.s2);
  amp /= static_cast<double>(res.stokes.size());
  res.amplitude = amp;

  double rmin = std::numeric_limits<double>::infinity(), rmax = 0;
  int resolved = 0;
  for (std::size_t k = 0; k < res.stokes.size(); ++k) {
    const double r = std::hypot(res.stokes[k].s1, res.stokes[k].s2);
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    double est = std::numeric_limits<double>::quiet_NaN();
    double err = std::numeric_limits<double>::quiet_NaN();
    try {
      est = tracking::rotor_angle(res.stokes[k], amp);
      err = std::abs(std::remainder(est - res.theta_true[k], pi));
      res.mean_abs_error += err;
      res.max_abs_error = std::max(res.max_abs_error, err);
      ++resolved;
    } catch (const degenerate_error&) {
      ++res.degenerate_poses;
    }
    res.theta_est.push_back(est);
    res.abs_error.push_back(err);
  }
  if (resolved == 0) throw degenerate_error("rotor: every pose below the noise floor");
  res.mean_abs_error /= static_cast<double>(resolved);
  res.radius_rel_spread = (rmax - rmin) / amp;
  return res;
}

// ---- sphere position tracking ----

struct TrackConfig {
  double sphere_diameter = 1.00e-3;  ///< m
  double diffraction_scale = 1.35;
  double beam_width = 2.84e-3;  ///< 90-10 knife width, m
  double wavelength = 1550e-9;
  int grid_n = 256;
  double step = 50e-6;  ///< stage step, m
  // defaults land on LUT cell centers, mirroring the calibrated stage motion
  double start_x = -3.425e-3, start_y = -0.425e-3;
  double end_x = 3.425e-3, end_y = -0.425e-3;
  double step_period = 0;       ///< s between steps; 0 = one window per step
  double sample_period = 250e-12;
  double window = 250e-12;      ///< acquisition window per step, s
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  double lut_resolution = 50e-6;
  double lut_half_span_factor = 1.5;  ///< LUT covers +- factor * beam_width
  bool use_half_plane_prior = true;
  double continuity_scale = 200e-6;  ///< m; per-step displacement prior
  int threads = 1;
};

struct TrackResult {
  tracking::LookupTable lut;
  sensing::TraceSet trace;
  std::vector<obstruction::Pose> truth;
  std::vector<tracking::MeasuredSample> measured;
  std::array<double, 4> sigma{};  ///< per-window likelihood sigmas
  std::vector<tracking::TrackPoint> points;
};

/// Staircase trajectory of the stage: the object dwells at each step
/// position for a full period, then jumps to the next one.
inline obstruction::Trajectory make_step_trajectory(const TrackConfig& cfg, double step_period) {
  const double len = std::hypot(cfg.end_x - cfg.start_x, cfg.end_y - cfg.start_y);
  const int n_steps = static_cast<int>(std::floor(len / cfg.step)) + 1;
  const double hop = 1e-6 * step_period;  ///< jump duration between dwells
  std::vector<obstruction::TrajectorySample> samples;
  for (int k = 0; k < n_steps; ++k) {
    const double u = cfg.step * k / len;
    const obstruction::Pose pose{cfg.start_x + u * (cfg.end_x - cfg.start_x),
                                 cfg.start_y + u * (cfg.end_y - cfg.start_y), 0.0};
    samples.push_back({k * step_period, pose});
    samples.push_back({(k + 1) * step_period - hop, pose});
  }
  return obstruction::Trajectory(std::move(samples));
}

inline TrackResult run_track(const TrackConfig& cfg,
                             const tracking::LookupTable* prebuilt_lut = nullptr) {
  obstruction::Obstacle sphere(obstruction::Disk{cfg.sphere_diameter}, {0, 0, 0},
                               cfg.diffraction_scale);
  const double lut_half_span = cfg.lut_half_span_factor * cfg.beam_width;
  if (cfg.step > 2.0 * lut_half_span)
    throw config_error("track scenario: step size larger than the LUT grid extent");

  const double waist = beam::calibrate_radial_waist(cfg.beam_width, cfg.wavelength);
  const GridGeometry g = beam::default_geometry_for_width(cfg.beam_width, cfg.grid_n);
  const beam::VectorField field = beam::radial_mode(waist, cfg.wavelength, 0.0, g);
  const polarimetry::Tomography tomo = polarimetry::tomography(field);

  TrackResult res;
  if (prebuilt_lut) {
    res.lut = *prebuilt_lut;
  } else {
    res.lut = tracking::build_lut(
        tomo, sphere, tracking::LutGridSpec::centered(lut_half_span, cfg.lut_resolution),
        tracking::LutSource::ideal_mode, cfg.threads);
  }

  const double step_period = cfg.step_period > 0 ? cfg.step_period : cfg.window;
  const obstruction::Trajectory traj = make_step_trajectory(cfg, step_period);
  const auto n_steps = traj.samples.size() / 2;  ///< two samples bound each dwell
  const double duration = (static_cast<double>(n_steps) - 1) * step_period + cfg.window;
  // extend the last dwell so the final window stays inside the trajectory
  obstruction::Trajectory traj_ext = traj;
  traj_ext.samples.push_back({traj.t_end() + cfg.window * (1.0 + 1e-9),
                              traj.samples.back().pose});

  res.trace = sensing::synthesize(field, traj_ext, sphere,
                                  sensing::default_channels(cfg.noise_sigma),
                                  cfg.sample_period, duration, cfg.seed);

  const auto n_window = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::round(cfg.window / cfg.sample_period)));
  const double sigma_floor = 1e-9 * std::max(1e-300, res.lut.max_s0());
  const double sigma_w =
      std::max(sigma_floor, cfg.noise_sigma / std::sqrt(static_cast<double>(n_window)));
  res.sigma = {sigma_w, sigma_w, sigma_w, sigma_w};

  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * step_period;
    res.truth.push_back(traj.samples[2 * k].pose);
    res.measured.push_back({t, sensing::integrate_window(res.trace, t, cfg.window)});
  }

  tracking::PriorConfig prior;
  prior.continuity_scale = cfg.continuity_scale;
  if (cfg.use_half_plane_prior) {
    const auto& p0 = res.truth.front();
    prior.initial_half_plane =
        tracking::PriorConfig::HalfPlanePrior{0, 0, std::atan2(p0.y0, p0.x0)};
  }
  res.points = tracking::track(res.lut, res.measured, res.sigma, prior);
  return res;
}

// ---- knife-edge transit ----

struct KnifeConfig {
  double beam_width = 2.0e-6;  ///< focused 90-10 width, m
  double wavelength = 1550e-9;
  int grid_n = 256;
  double speed = 27.0;          ///< m/s
  double edge_theta = pi;       ///< half-plane normal; pi covers x < x0
  double start_offset = -2.5e-6, end_offset = 2.5e-6;  ///< edge travel, m
  double sample_period = 100e-12;
  double noise_sigma = 0.002;
  std::uint64_t seed = 0;
  double trigger_threshold = 0.05;
  double trigger_hysteresis = 0.02;
};

struct KnifeResult {
  sensing::TraceSet trace;
  std::vector<double> t;
  std::vector<polarimetry::StokesVector> stokes;  ///< raw, per sample
  std::vector<tracking::EventWindow> events;
  std::optional<tracking::KnifeDirection> direction;
};

inline KnifeResult run_knife(const KnifeConfig& cfg) {
  if (cfg.speed <= 0) throw config_error("knife scenario: speed must be > 0");
  if (cfg.end_offset <= cfg.start_offset)
    throw config_error("knife scenario: end offset must exceed start offset");
  const double waist = beam::calibrate_radial_waist(cfg.beam_width, cfg.wavelength);
  const GridGeometry g = beam::default_geometry_for_width(cfg.beam_width, cfg.grid_n);
  const beam::VectorField field = beam::radial_mode(waist, cfg.wavelength, 0.0, g);

  const double travel = cfg.end_offset - cfg.start_offset;
  const double duration = travel / cfg.speed;
  // the edge advances opposite the covered-side normal, so coverage grows
  // from zero to the full beam as the offset increases
  const double mx = -std::cos(cfg.edge_theta), my = -std::sin(cfg.edge_theta);
  const obstruction::Trajectory traj(
      {{0.0, {cfg.start_offset * mx, cfg.start_offset * my, cfg.edge_theta}},
       {duration, {cfg.end_offset * mx, cfg.end_offset * my, cfg.edge_theta}}});
  obstruction::Obstacle knife(obstruction::HalfPlane{}, traj.samples.front().pose);

  KnifeResult res;
  res.trace = sensing::synthesize(field, traj, knife, sensing::default_channels(cfg.noise_sigma),
                                  cfg.sample_period, duration, cfg.seed);
  for (std::size_t k = 0; k < res.trace.length(); ++k) {
    const double t = res.trace.time_of(k);
    res.t.push_back(t);
    std::array<double, 4> v;
    for (int c = 0; c < 4; ++c) v[c] = sensing::detail::aligned_value(res.trace, c, t);
    res.stokes.push_back(polarimetry::stokes_from_intensities(v));
  }
  res.events = tracking::trigger(res.trace, cfg.trigger_threshold, cfg.trigger_hysteresis);
  try {
    res.direction = tracking::knife_direction(res.stokes);
  } catch (const degenerate_error&) {
    res.direction = std::nullopt;
  }
  return res;
}

}  // namespace vbsense::scenarios

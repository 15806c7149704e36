#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vbsense/errors.hpp"
#include "vbsense/io.hpp"
#include "vbsense/obstruction.hpp"
#include "vbsense/parallel.hpp"
#include "vbsense/polarimetry.hpp"
#include "vbsense/sensing.hpp"

namespace vbsense::tracking {

/// Uniform mesh of candidate object centers. Cell (i, j) is centered at
/// (x_min + (i + 0.5) res, y_min + (j + 0.5) res).
struct LutGridSpec {
  int nx = 0, ny = 0;
  double x_min = 0, y_min = 0;
  double resolution = 0;  ///< m

  double x(int i) const { return x_min + (i + 0.5) * resolution; }
  double y(int j) const { return y_min + (j + 0.5) * resolution; }
  int cells() const { return nx * ny; }

  void validate() const {
    if (nx < 1 || ny < 1) throw config_error("lut grid: nx, ny must be >= 1");
    if (resolution <= 0) throw config_error("lut grid: resolution must be > 0");
  }

  /// Symmetric grid covering +-half_span around the beam axis.
  static LutGridSpec centered(double half_span, double resolution) {
    LutGridSpec g;
    g.resolution = resolution;
    g.nx = g.ny = std::max(1, static_cast<int>(std::round(2.0 * half_span / resolution)));
    g.x_min = -0.5 * g.nx * resolution;
    g.y_min = -0.5 * g.ny * resolution;
    return g;
  }
};

enum class LutSource { ideal_mode, measured_tomography };

/// Expected detector intensities (and hence Stokes vectors) for each
/// candidate object position.
struct LookupTable {
  LutGridSpec grid;
  obstruction::Obstacle shape;  ///< the obstacle the table was built for
  LutSource source = LutSource::ideal_mode;
  std::array<Array2D<double>, 4> expected;  ///< channel order H, V, D, A

  std::array<double, 4> at(int i, int j) const {
    return {expected[0].at(i, j), expected[1].at(i, j), expected[2].at(i, j),
            expected[3].at(i, j)};
  }

  polarimetry::StokesVector stokes_at(int i, int j) const {
    const auto e = at(i, j);
    return polarimetry::stokes_from_intensities(e[0], e[1], e[2], e[3]);
  }

  double max_s0() const {
    double m = 0;
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i)
        m = std::max(m, expected[0].at(i, j) + expected[1].at(i, j));
    return m;
  }
};

/// Evaluate the forward model over every candidate pose in the grid.
inline LookupTable build_lut(const polarimetry::Tomography& tomo,
                             const obstruction::Obstacle& shape, const LutGridSpec& grid,
                             LutSource source, int threads = 1) {
  grid.validate();
  const double extent = std::min(tomo.geometry.extent_x(), tomo.geometry.extent_y());
  if (const auto* d = std::get_if<obstruction::Disk>(&shape.shape))
    if (d->diameter * shape.diffraction_scale > extent)
      throw config_error("build_lut: obstacle larger than the tomography extent");
  if (grid.x(grid.nx - 1) > 0.5 * tomo.geometry.extent_x() ||
      grid.y(grid.ny - 1) > 0.5 * tomo.geometry.extent_y() ||
      grid.x(0) < -0.5 * tomo.geometry.extent_x() || grid.y(0) < -0.5 * tomo.geometry.extent_y())
    throw config_error("build_lut: grid bounds exceed the tomography extent");

  LookupTable lut;
  lut.grid = grid;
  lut.shape = shape;
  lut.source = source;
  for (auto& p : lut.expected) p = Array2D<double>(grid.nx, grid.ny);
  parallel_for(static_cast<std::size_t>(grid.cells()), threads, [&](std::size_t cell) {
    const int i = static_cast<int>(cell) % grid.nx;
    const int j = static_cast<int>(cell) / grid.nx;
    obstruction::Pose p = shape.pose;
    p.x0 = grid.x(i);
    p.y0 = grid.y(j);
    const auto inten = polarimetry::intensities(tomo, shape.with_pose(p));
    for (int c = 0; c < 4; ++c) lut.expected[c].at(i, j) = std::max(0.0, inten[c]);
  });
  return lut;
}

/// Grid posterior over object positions for a single measurement.
struct Posterior {
  LutGridSpec grid;
  Array2D<double> log_like;   ///< log-likelihood + log-prior, unnormalized
  Array2D<double> posterior;  ///< normalized probability per cell
  int map_i = 0, map_j = 0;
  double map_x = 0, map_y = 0;
  std::vector<std::pair<int, int>> credible_region;  ///< HPD cells, mass >= 0.68
  double credible_mass = 0;
  bool degenerate = false;  ///< two disjoint high-probability islands
};

namespace detail {

/// Connected components (4-neighborhood) of the credible region; the
/// posterior is degenerate when at least two components each hold a
/// non-trivial share of the region's mass.
inline bool detect_degeneracy(const Posterior& post, double component_mass_fraction = 0.1) {
  if (post.credible_region.empty()) return false;
  Array2D<int> label(post.grid.nx, post.grid.ny, -1);
  for (const auto& [i, j] : post.credible_region) label.at(i, j) = 0;
  int n_components = 0;
  std::vector<double> mass;
  std::vector<std::pair<int, int>> stack;
  for (const auto& seed : post.credible_region) {
    if (label.at(seed.first, seed.second) != 0) continue;
    ++n_components;
    mass.push_back(0);
    stack.push_back(seed);
    label.at(seed.first, seed.second) = n_components;
    while (!stack.empty()) {
      const auto [i, j] = stack.back();
      stack.pop_back();
      mass.back() += post.posterior.at(i, j);
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int ni = i + di[k], nj = j + dj[k];
        if (ni < 0 || nj < 0 || ni >= post.grid.nx || nj >= post.grid.ny) continue;
        if (label.at(ni, nj) == 0) {
          label.at(ni, nj) = n_components;
          stack.emplace_back(ni, nj);
        }
      }
    }
  }
  if (n_components < 2) return false;
  double total = 0;
  for (double m : mass) total += m;
  int heavy = 0;
  for (double m : mass)
    if (m >= component_mass_fraction * total) ++heavy;
  return heavy >= 2;
}

}  // namespace detail

/// Per-cell Gaussian log-likelihood of the four measured channel
/// intensities, combined with an optional log-prior, normalized into a
/// posterior with MAP estimate and 68% highest-density credible region.
/// The likelihood lives in intensity space: the four channels carry
/// independent noise there, whereas Stokes combinations would correlate it.
inline Posterior likelihood(const LookupTable& lut, const std::array<double, 4>& measured,
                            const std::array<double, 4>& sigma,
                            const Array2D<double>* log_prior = nullptr,
                            double credible_mass_target = 0.68) {
  for (const double s : sigma)
    if (s <= 0) throw config_error("likelihood: noise sigmas must be > 0");

  Posterior post;
  post.grid = lut.grid;
  post.log_like = Array2D<double>(lut.grid.nx, lut.grid.ny);
  post.posterior = Array2D<double>(lut.grid.nx, lut.grid.ny);
  double best = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < lut.grid.ny; ++j)
    for (int i = 0; i < lut.grid.nx; ++i) {
      double ll = 0;
      for (int c = 0; c < 4; ++c) {
        const double r = (measured[c] - lut.expected[c].at(i, j)) / sigma[c];
        ll -= 0.5 * r * r;
      }
      if (log_prior) ll += log_prior->at(i, j);
      post.log_like.at(i, j) = ll;
      if (ll > best) {
        best = ll;
        post.map_i = i;
        post.map_j = j;
      }
    }
  if (!std::isfinite(best)) throw config_error("likelihood: prior excludes every cell");
  post.map_x = lut.grid.x(post.map_i);
  post.map_y = lut.grid.y(post.map_j);

  double total = 0;
  for (std::size_t k = 0; k < post.posterior.size(); ++k) {
    const double p = std::exp(post.log_like.data()[k] - best);
    post.posterior.data()[k] = p;
    total += p;
  }
  for (auto& p : post.posterior) p /= total;

  // highest-posterior-density region at the target mass
  std::vector<int> order(post.posterior.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return post.posterior.data()[a] > post.posterior.data()[b];
  });
  double acc = 0;
  for (const int k : order) {
    post.credible_region.emplace_back(k % lut.grid.nx, k / lut.grid.nx);
    acc += post.posterior.data()[k];
    if (acc >= credible_mass_target) break;
  }
  post.credible_mass = acc;
  post.degenerate = detail::detect_degeneracy(post);
  return post;
}

/// Prior configuration for sequential tracking.
struct PriorConfig {
  /// Half-plane restriction applied at the first sample: keep cells p with
  /// (p - (x0, y0)) . (cos theta, sin theta) >= 0.
  struct HalfPlanePrior {
    double x0 = 0, y0 = 0, theta = 0;
  };
  std::optional<HalfPlanePrior> initial_half_plane;
  /// Gaussian continuity penalty scale on per-step displacement (m);
  /// infinity disables the prior.
  double continuity_scale = std::numeric_limits<double>::infinity();
};

/// One measurement to invert: four channel intensities at time t.
struct MeasuredSample {
  double t = 0;
  std::array<double, 4> intensities{};
};

struct TrackPoint {
  double t = 0;
  bool reliable = true;  ///< false when the beam was (nearly) fully covered
  double x0 = 0, y0 = 0;
  int region_cell_count = 0;
  bool degenerate = false;
  std::vector<std::pair<int, int>> region_cells;  ///< HPD cells, empty when unreliable

  bool region_contains(int i, int j) const {
    return std::find(region_cells.begin(), region_cells.end(), std::pair{i, j}) !=
           region_cells.end();
  }
};

/// Sequential MAP over the LUT grid. Inference per sample is independent;
/// only the continuity prior couples a step to the previous estimate, so no
/// iteration over past data occurs.
inline std::vector<TrackPoint> track(const LookupTable& lut,
                                     const std::vector<MeasuredSample>& series,
                                     const std::array<double, 4>& sigma,
                                     const PriorConfig& prior = {},
                                     double s0_floor_fraction = 1e-3) {
  if (series.empty()) throw config_error("track: empty measurement series");
  const double s0_floor = s0_floor_fraction * lut.max_s0();

  std::vector<TrackPoint> out;
  out.reserve(series.size());
  std::optional<std::pair<double, double>> prev;
  int last_region = 0;
  bool first = true;
  for (const MeasuredSample& m : series) {
    TrackPoint tp;
    tp.t = m.t;
    const double s0 = m.intensities[0] + m.intensities[1];
    if (s0 < s0_floor) {
      // fully covered: no information, carry the last credible region
      tp.reliable = false;
      tp.region_cell_count = last_region;
      if (prev) {
        tp.x0 = prev->first;
        tp.y0 = prev->second;
      }
      out.push_back(tp);
      first = false;
      continue;
    }

    Array2D<double> log_prior(lut.grid.nx, lut.grid.ny, 0.0);
    bool have_prior = false;
    if (first && prior.initial_half_plane) {
      const auto& hp = *prior.initial_half_plane;
      for (int j = 0; j < lut.grid.ny; ++j)
        for (int i = 0; i < lut.grid.nx; ++i) {
          const double d = (lut.grid.x(i) - hp.x0) * std::cos(hp.theta) +
                           (lut.grid.y(j) - hp.y0) * std::sin(hp.theta);
          if (d < 0) log_prior.at(i, j) = -std::numeric_limits<double>::infinity();
        }
      have_prior = true;
    }
    if (!first && prev && std::isfinite(prior.continuity_scale)) {
      const double inv2s2 = 0.5 / (prior.continuity_scale * prior.continuity_scale);
      for (int j = 0; j < lut.grid.ny; ++j)
        for (int i = 0; i < lut.grid.nx; ++i) {
          const double ddx = lut.grid.x(i) - prev->first;
          const double ddy = lut.grid.y(j) - prev->second;
          log_prior.at(i, j) -= (ddx * ddx + ddy * ddy) * inv2s2;
        }
      have_prior = true;
    }

    const Posterior post =
        likelihood(lut, m.intensities, sigma, have_prior ? &log_prior : nullptr);
    tp.x0 = post.map_x;
    tp.y0 = post.map_y;
    tp.region_cell_count = static_cast<int>(post.credible_region.size());
    tp.region_cells = post.credible_region;
    tp.degenerate = post.degenerate;
    last_region = tp.region_cell_count;
    prev = {tp.x0, tp.y0};
    out.push_back(tp);
    first = false;
  }
  return out;
}

/// Bar rotation angle from the (s1, s2) quadrature pair. For the ideal
/// radial mode a bar at angle theta gives s1 = -C cos 2 theta and
/// s2 = -C sin 2 theta, so the branch-safe inversion is
/// theta = atan2(-s2, -s1) / 2, pi-periodic by construction.
/// `calibration_amplitude` is the measured circle radius C; readings with
/// hypot(s1, s2) below `floor_fraction` of it are rejected as degenerate.
inline double rotor_angle(const polarimetry::StokesVector& s, double calibration_amplitude,
                          double floor_fraction = 0.05) {
  if (calibration_amplitude <= 0) throw config_error("rotor_angle: calibration amplitude must be > 0");
  if (std::hypot(s.s1, s.s2) < floor_fraction * calibration_amplitude)
    throw degenerate_error("rotor_angle: (s1, s2) below noise floor, bar angle indistinguishable");
  double theta = 0.5 * std::atan2(-s.s2, -s.s1);
  if (theta < 0) theta += std::numbers::pi;
  return theta;
}

enum class MotionAxis { horizontal, vertical };

struct KnifeDirection {
  MotionAxis axis = MotionAxis::horizontal;
  bool ambiguous_180 = true;  ///< the sign of the motion is never observable
  bool low_confidence = false;
  double s1_energy = 0, s2_energy = 0;
};

/// Classify a knife-edge transit: a vertical edge moving horizontally
/// modulates s1 (s2 stays zero) and conversely. Uses raw Stokes values
/// within the transit window, found from the s0 drop.
inline KnifeDirection knife_direction(const std::vector<polarimetry::StokesVector>& series,
                                      double confidence_ratio = 0.5) {
  if (series.size() < 3) throw degenerate_error("knife_direction: series too short");
  const double s0_start = series.front().s0;
  if (s0_start <= 0) throw degenerate_error("knife_direction: zero initial power");
  std::size_t lo = series.size(), hi = 0;
  bool covered = false;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double f = series[k].s0 / s0_start;
    if (f < 0.99 && lo == series.size()) lo = k;
    if (f < 0.05) {
      covered = true;
      hi = k;
      break;
    }
  }
  if (!covered || lo >= hi)
    throw degenerate_error("knife_direction: no full s0 transition found");

  KnifeDirection out;
  for (std::size_t k = lo; k <= hi; ++k) {
    out.s1_energy += series[k].s1 * series[k].s1;
    out.s2_energy += series[k].s2 * series[k].s2;
  }
  out.axis = (out.s1_energy >= out.s2_energy) ? MotionAxis::horizontal : MotionAxis::vertical;
  const double lo_e = std::min(out.s1_energy, out.s2_energy);
  const double hi_e = std::max(out.s1_energy, out.s2_energy);
  out.low_confidence = (hi_e <= 0) || (lo_e / hi_e > confidence_ratio);
  return out;
}

struct EventWindow {
  double t_start = 0, t_end = 0;
  double duration() const { return t_end - t_start; }
};

struct TriggerOptions {
  double stationary_window = 4e-9;  ///< s; span test horizon for settled signals
  double stationary_eps = 0.02;     ///< fraction of baseline
  double smoothing_window = 1e-9;   ///< s; boxcar applied to s0 before detection
  int baseline_samples = 16;        ///< initial-baseline estimate length
};

/// Event windows where s0 departs from its initial baseline by more than
/// threshold_fraction, with hysteresis. An event ends when the signal
/// returns within (threshold - hysteresis) of the baseline, or settles to a
/// new stationary level (knife fully covering the beam). Windows may abut;
/// there is no dead time.
inline std::vector<EventWindow> trigger(const sensing::TraceSet& trace, double threshold_fraction,
                                        double hysteresis, const TriggerOptions& opt = {}) {
  if (threshold_fraction <= 0 || threshold_fraction >= 1)
    throw config_error("trigger: threshold_fraction must be in (0, 1)");
  if (hysteresis < 0 || hysteresis >= threshold_fraction)
    throw config_error("trigger: hysteresis must be in [0, threshold_fraction)");
  trace.validate();
  const std::size_t n = trace.length();
  std::vector<double> s0(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = trace.time_of(k);
    s0[k] = sensing::detail::aligned_value(trace, 0, t) + sensing::detail::aligned_value(trace, 1, t);
  }
  // boxcar smoothing against per-sample detector noise
  const int half = std::max(0, static_cast<int>(std::round(0.5 * opt.smoothing_window / trace.sample_period)));
  std::vector<double> sm(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t a = (k < static_cast<std::size_t>(half)) ? 0 : k - half;
    const std::size_t b = std::min(n - 1, k + static_cast<std::size_t>(half));
    double acc = 0;
    for (std::size_t q = a; q <= b; ++q) acc += s0[q];
    sm[k] = acc / static_cast<double>(b - a + 1);
  }

  const auto nb = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, opt.baseline_samples)));
  double baseline = 0;
  for (std::size_t k = 0; k < nb; ++k) baseline += sm[k];
  baseline /= static_cast<double>(nb);
  if (baseline <= 0) return {};

  const auto stat_len = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::round(opt.stationary_window / trace.sample_period)));

  std::vector<EventWindow> events;
  bool in_event = false;
  std::size_t start = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double depart = std::abs(sm[k] - baseline) / baseline;
    if (!in_event) {
      if (depart > threshold_fraction) {
        in_event = true;
        start = k;
      }
    } else {
      if (depart < threshold_fraction - hysteresis) {
        events.push_back({trace.time_of(start), trace.time_of(k)});
        in_event = false;
        continue;
      }
      // settled at a new level? close the event at the start of the run
      if (k + stat_len <= n) {
        double lo = sm[k], hi2 = sm[k];
        for (std::size_t q = k; q < k + stat_len; ++q) {
          lo = std::min(lo, sm[q]);
          hi2 = std::max(hi2, sm[q]);
        }
        if (hi2 - lo < opt.stationary_eps * baseline) {
          events.push_back({trace.time_of(start), trace.time_of(k)});
          in_event = false;
          // skip past the stationary run so one plateau yields one event end
          while (k + 1 < n && std::abs(sm[k + 1] - sm[k]) < opt.stationary_eps * baseline &&
                 std::abs(sm[k + 1] - baseline) / baseline > threshold_fraction - hysteresis)
            ++k;
        }
      }
    }
  }
  if (in_event) events.push_back({trace.time_of(start), trace.time_of(n - 1)});
  return events;
}

// ---- LUT persistence (portable array container) ----

namespace detail {

inline std::string shape_name(const obstruction::Obstacle& o) {
  if (std::holds_alternative<obstruction::Disk>(o.shape)) return "disk";
  if (std::holds_alternative<obstruction::Bar>(o.shape)) return "bar";
  if (std::holds_alternative<obstruction::HalfPlane>(o.shape)) return "half_plane";
  return "none";
}

}  // namespace detail

inline void save_lut(const LookupTable& lut, const std::string& path) {
  io::ArrayFile a;
  a.geometry = GridGeometry(lut.grid.nx, lut.grid.ny, lut.grid.resolution, lut.grid.resolution);
  nlohmann::json shape = {{"kind", detail::shape_name(lut.shape)},
                          {"diffraction_scale", lut.shape.diffraction_scale},
                          {"theta", lut.shape.pose.theta}};
  if (const auto* d = std::get_if<obstruction::Disk>(&lut.shape.shape))
    shape["diameter"] = d->diameter;
  if (const auto* b = std::get_if<obstruction::Bar>(&lut.shape.shape)) shape["width"] = b->width;
  a.meta = {{"kind", "lut"},
            {"x_min", lut.grid.x_min},
            {"y_min", lut.grid.y_min},
            {"resolution", lut.grid.resolution},
            {"source", lut.source == LutSource::ideal_mode ? "ideal_mode" : "measured_tomography"},
            {"shape", shape}};
  a.plane_names = {"i0", "i90", "i45", "i135"};
  for (const auto& p : lut.expected) a.planes.push_back(p);
  io::save_array_file(a, path);
}

inline LookupTable load_lut(const std::string& path) {
  const io::ArrayFile a = io::load_array_file(path);
  if (a.meta.value("kind", "") != "lut") throw parse_error("not a LUT file: " + path);
  LookupTable lut;
  lut.grid.nx = a.geometry.nx;
  lut.grid.ny = a.geometry.ny;
  lut.grid.resolution = a.meta.at("resolution").get<double>();
  lut.grid.x_min = a.meta.at("x_min").get<double>();
  lut.grid.y_min = a.meta.at("y_min").get<double>();
  lut.source = a.meta.value("source", "ideal_mode") == "measured_tomography"
                   ? LutSource::measured_tomography
                   : LutSource::ideal_mode;
  const auto shape = a.meta.value("shape", nlohmann::json::object());
  const std::string kind = shape.value("kind", "none");
  obstruction::Pose pose{0, 0, shape.value("theta", 0.0)};
  if (kind == "disk")
    lut.shape = obstruction::Obstacle(obstruction::Disk{shape.at("diameter").get<double>()}, pose,
                                      shape.value("diffraction_scale", 1.35));
  else if (kind == "bar")
    lut.shape = obstruction::Obstacle(obstruction::Bar{shape.at("width").get<double>()}, pose);
  else if (kind == "half_plane")
    lut.shape = obstruction::Obstacle(obstruction::HalfPlane{}, pose);
  lut.expected = {a.plane("i0"), a.plane("i90"), a.plane("i45"), a.plane("i135")};
  return lut;
}

/// Track output CSV: t, x0_hat, y0_hat, region_cell_count, degenerate_flag.
/// Unreliable (covered) samples emit empty estimate fields.
inline void export_track_csv(const std::vector<TrackPoint>& points, const std::string& path,
                             const std::string& provenance = {}) {
  std::ofstream f(path);
  if (!f) throw parse_error("cannot open for writing: " + path);
  if (!provenance.empty()) f << "# " << provenance << "\n";
  f << "t,x0_hat,y0_hat,region_cell_count,degenerate_flag\n";
  char buf[160];
  for (const TrackPoint& p : points) {
    if (p.reliable) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d,%d\n", p.t, p.x0, p.y0,
                    p.region_cell_count, p.degenerate ? 1 : 0);
      f << buf;
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,,,%d,%d\n", p.t, p.region_cell_count,
                    p.degenerate ? 1 : 0);
      f << buf;
    }
  }
}

}  // namespace vbsense::tracking

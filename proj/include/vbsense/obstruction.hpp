#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <numbers>
#include <variant>
#include <vector>

#include <json.hpp>

#include "vbsense/beam.hpp"
#include "vbsense/errors.hpp"
#include "vbsense/grid.hpp"

namespace vbsense::obstruction {

/// Obstacle pose: center coordinates and rotation angle in the field frame.
struct Pose {
  double x0 = 0, y0 = 0;  ///< m
  double theta = 0;       ///< rad
};

struct Disk {
  double diameter = 0;  ///< physical diameter, m
};

/// Infinite opaque strip of the given width; the strip axis passes through
/// the pose center along direction theta.
struct Bar {
  double width = 0;  ///< m
};

/// Opaque half-plane (knife edge). Covers points p with
/// (p - center) . (cos theta, sin theta) > 0; the edge line is perpendicular
/// to that normal. theta = 0 covers x > x0 (vertical edge).
struct HalfPlane {};

/// No obstruction (identity mask).
struct None {};

struct Obstacle {
  std::variant<None, Disk, Bar, HalfPlane> shape;
  Pose pose{};
  double diffraction_scale = 1.35;  ///< applied to Disk diameter only

  Obstacle() : shape(None{}) {}
  Obstacle(Disk d, Pose p, double scale = 1.35) : shape(d), pose(p), diffraction_scale(scale) {
    if (d.diameter <= 0) throw config_error("obstacle: disk diameter must be > 0");
    if (scale < 1.0 || scale > 2.0) throw config_error("obstacle: diffraction_scale must be in [1, 2]");
  }
  Obstacle(Bar b, Pose p) : shape(b), pose(p) {
    if (b.width <= 0) throw config_error("obstacle: bar width must be > 0");
  }
  Obstacle(HalfPlane h, Pose p) : shape(h), pose(p) {}

  Obstacle with_pose(const Pose& p) const {
    Obstacle o = *this;
    o.pose = p;
    return o;
  }

  bool is_none() const { return std::holds_alternative<None>(shape); }

  /// Signed distance to the covered region boundary (< 0 inside).
  double signed_distance(double x, double y) const {
    const double rx = x - pose.x0, ry = y - pose.y0;
    if (std::holds_alternative<Disk>(shape)) {
      const double r_eff = 0.5 * std::get<Disk>(shape).diameter * diffraction_scale;
      return std::hypot(rx, ry) - r_eff;
    }
    if (std::holds_alternative<Bar>(shape)) {
      // distance from the strip axis
      const double s = -rx * std::sin(pose.theta) + ry * std::cos(pose.theta);
      return std::abs(s) - 0.5 * std::get<Bar>(shape).width;
    }
    if (std::holds_alternative<HalfPlane>(shape))
      return -(rx * std::cos(pose.theta) + ry * std::sin(pose.theta));
    return std::numeric_limits<double>::infinity();  // None
  }
};

/// Transmission indicator of the covered region: 1 inside, 0 outside.
inline int indicator(const Obstacle& o, double x, double y) {
  return o.signed_distance(x, y) < 0.0 ? 1 : 0;
}

namespace detail {

/// Area fraction of the cell inside the intersection of half-planes
/// a_k x + b_k y <= c_k (Sutherland-Hodgman clip of the cell rectangle).
inline double clipped_fraction(double cx, double cy, double dx, double dy,
                               const double (*cons)[3], int n_cons) {
  double px[8], py[8];
  int n = 4;
  px[0] = cx - 0.5 * dx; py[0] = cy - 0.5 * dy;
  px[1] = cx + 0.5 * dx; py[1] = cy - 0.5 * dy;
  px[2] = cx + 0.5 * dx; py[2] = cy + 0.5 * dy;
  px[3] = cx - 0.5 * dx; py[3] = cy + 0.5 * dy;
  double qx[8], qy[8];
  for (int k = 0; k < n_cons; ++k) {
    const double a = cons[k][0], b = cons[k][1], c = cons[k][2];
    int m = 0;
    for (int i = 0; i < n; ++i) {
      const int j = (i + 1) % n;
      const double di = a * px[i] + b * py[i] - c;
      const double dj = a * px[j] + b * py[j] - c;
      if (di <= 0) {
        qx[m] = px[i];
        qy[m] = py[i];
        ++m;
      }
      if ((di < 0) != (dj < 0) && di != dj) {
        const double t = di / (di - dj);
        qx[m] = px[i] + t * (px[j] - px[i]);
        qy[m] = py[i] + t * (py[j] - py[i]);
        ++m;
      }
    }
    n = m;
    if (n == 0) return 0.0;
    std::copy(qx, qx + n, px);
    std::copy(qy, qy + n, py);
  }
  double area2 = 0;
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    area2 += px[i] * py[j] - px[j] * py[i];
  }
  // shoelace roundoff can overshoot a fully covered cell by ~1 ulp
  return std::clamp(0.5 * std::abs(area2) / (dx * dy), 0.0, 1.0);
}

}  // namespace detail

/// Fractional coverage of one grid cell. Cells strictly inside/outside are
/// classified by a signed-distance bound (all shapes are convex). Boundary
/// cells of the disk use 4x4 subpixel supersampling; straight-edged shapes
/// (bar, half-plane) use the exact clipped cell area, i.e. the limit of
/// that supersampling, which the rotor circle-radius tolerance requires.
inline double cell_coverage(const Obstacle& o, double cx, double cy, double dx, double dy) {
  const double half_diag = 0.5 * std::hypot(dx, dy);
  const double sd = o.signed_distance(cx, cy);
  if (sd <= -half_diag) return 1.0;
  if (sd >= half_diag) return 0.0;
  if (std::holds_alternative<Disk>(o.shape)) {
    int inside = 0;
    for (int a = 0; a < 4; ++a) {
      const double sx = cx + (a - 1.5) * dx / 4.0;
      for (int b = 0; b < 4; ++b) {
        const double sy = cy + (b - 1.5) * dy / 4.0;
        inside += indicator(o, sx, sy);
      }
    }
    return inside / 16.0;
  }
  if (const auto* b = std::get_if<Bar>(&o.shape)) {
    // covered: |(-sin, cos) . (p - center)| <= width / 2
    const double s = std::sin(o.pose.theta), c = std::cos(o.pose.theta);
    const double proj = -s * o.pose.x0 + c * o.pose.y0;
    const double half = 0.5 * b->width;
    const double cons[2][3] = {{-s, c, proj + half}, {s, -c, -proj + half}};
    return detail::clipped_fraction(cx, cy, dx, dy, cons, 2);
  }
  if (std::holds_alternative<HalfPlane>(o.shape)) {
    // covered: (cos, sin) . (p - center) >= 0
    const double c = std::cos(o.pose.theta), s = std::sin(o.pose.theta);
    const double cons[1][3] = {{-c, -s, -(c * o.pose.x0 + s * o.pose.y0)}};
    return detail::clipped_fraction(cx, cy, dx, dy, cons, 1);
  }
  return 0.0;  // None
}

/// Coverage map over the sub-rectangle of the grid that can intersect the
/// obstacle, with pixel offset (i0, j0) into the full grid.
struct CoveragePatch {
  int i0 = 0, j0 = 0;
  Array2D<double> c;  ///< fractional coverage per cell, in [0, 1]
};

inline CoveragePatch coverage_patch(const Obstacle& o, const GridGeometry& g) {
  int i_lo = 0, i_hi = g.nx - 1, j_lo = 0, j_hi = g.ny - 1;
  auto clamp_i = [&](double x) { return std::clamp(static_cast<int>(std::floor((x / g.dx) + 0.5 * (g.nx - 1))), 0, g.nx - 1); };
  auto clamp_j = [&](double y) { return std::clamp(static_cast<int>(std::floor((y / g.dy) + 0.5 * (g.ny - 1))), 0, g.ny - 1); };
  if (std::holds_alternative<None>(o.shape)) {
    CoveragePatch p;
    p.c = Array2D<double>(0, 0);
    return p;
  }
  if (const auto* d = std::get_if<Disk>(&o.shape)) {
    const double r = 0.5 * d->diameter * o.diffraction_scale;
    i_lo = clamp_i(o.pose.x0 - r - g.dx);
    i_hi = clamp_i(o.pose.x0 + r + g.dx);
    j_lo = clamp_j(o.pose.y0 - r - g.dy);
    j_hi = clamp_j(o.pose.y0 + r + g.dy);
  } else if (std::holds_alternative<HalfPlane>(o.shape)) {
    // tight bound only for axis-aligned normals
    const double c = std::cos(o.pose.theta), s = std::sin(o.pose.theta);
    if (std::abs(s) < 1e-12) {
      if (c > 0) i_lo = clamp_i(o.pose.x0 - g.dx);
      else i_hi = clamp_i(o.pose.x0 + g.dx);
    } else if (std::abs(c) < 1e-12) {
      if (s > 0) j_lo = clamp_j(o.pose.y0 - g.dy);
      else j_hi = clamp_j(o.pose.y0 + g.dy);
    }
  } else if (const auto* b = std::get_if<Bar>(&o.shape)) {
    const double c = std::cos(o.pose.theta), s = std::sin(o.pose.theta);
    const double half = 0.5 * b->width;
    if (std::abs(s) < 1e-12) {  // strip along x
      j_lo = clamp_j(o.pose.y0 - half - g.dy);
      j_hi = clamp_j(o.pose.y0 + half + g.dy);
    } else if (std::abs(c) < 1e-12) {  // strip along y
      i_lo = clamp_i(o.pose.x0 - half - g.dx);
      i_hi = clamp_i(o.pose.x0 + half + g.dx);
    }
  }
  CoveragePatch p;
  p.i0 = i_lo;
  p.j0 = j_lo;
  p.c = Array2D<double>(i_hi - i_lo + 1, j_hi - j_lo + 1);
  for (int j = j_lo; j <= j_hi; ++j)
    for (int i = i_lo; i <= i_hi; ++i)
      p.c.at(i - i_lo, j - j_lo) = cell_coverage(o, g.x(i), g.y(j), g.dx, g.dy);
  return p;
}

/// Babinet masking: E' = (1 - indicator) E per pixel. Boundary cells scale
/// the amplitude by sqrt(1 - coverage) so intensity is linear in coverage.
inline beam::VectorField apply(const Obstacle& o, const beam::VectorField& f) {
  beam::VectorField out = f;
  if (o.is_none()) return out;
  const CoveragePatch p = coverage_patch(o, f.geometry);
  for (int j = 0; j < p.c.ny(); ++j)
    for (int i = 0; i < p.c.nx(); ++i) {
      const double cov = p.c.at(i, j);
      if (cov == 0.0) continue;
      const double t = std::sqrt(1.0 - cov);
      out.ex.at(p.i0 + i, p.j0 + j) *= t;
      out.ey.at(p.i0 + i, p.j0 + j) *= t;
    }
  return out;
}

// ---- trajectories ----

struct TrajectorySample {
  double t = 0;  ///< s
  Pose pose;
};

/// Time-ordered pose samples, piecewise-linearly interpolated.
struct Trajectory {
  std::vector<TrajectorySample> samples;

  Trajectory() = default;
  explicit Trajectory(std::vector<TrajectorySample> s) : samples(std::move(s)) {
    if (samples.empty()) throw config_error("trajectory: needs at least one sample");
    for (std::size_t k = 1; k < samples.size(); ++k)
      if (samples[k].t <= samples[k - 1].t)
        throw config_error("trajectory: sample times must be strictly increasing");
  }

  double t_start() const { return samples.front().t; }
  double t_end() const { return samples.back().t; }
};

/// Pose at time t by piecewise-linear interpolation; angles interpolate on
/// the shortest arc.
inline Pose pose_at(const Trajectory& traj, double t) {
  const auto& s = traj.samples;
  if (t < s.front().t || t > s.back().t)
    throw std::out_of_range("pose_at: t outside trajectory range");
  if (s.size() == 1) return s.front().pose;
  auto it = std::upper_bound(s.begin(), s.end(), t,
                             [](double v, const TrajectorySample& ts) { return v < ts.t; });
  if (it == s.begin()) return s.front().pose;
  if (it == s.end()) return s.back().pose;
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double u = (t - a.t) / (b.t - a.t);
  Pose p;
  p.x0 = a.pose.x0 + u * (b.pose.x0 - a.pose.x0);
  p.y0 = a.pose.y0 + u * (b.pose.y0 - a.pose.y0);
  double dth = std::remainder(b.pose.theta - a.pose.theta, 2.0 * std::numbers::pi);
  p.theta = a.pose.theta + u * dth;
  return p;
}

/// Load a trajectory from a JSON list of {t, x0, y0, theta0} records (SI).
inline Trajectory load_trajectory_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw parse_error("cannot open trajectory file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("trajectory JSON: ") + e.what());
  }
  if (!j.is_array()) throw parse_error("trajectory JSON: expected a list of records");
  std::vector<TrajectorySample> samples;
  for (const auto& rec : j) {
    TrajectorySample s;
    try {
      s.t = rec.at("t").get<double>();
      s.pose.x0 = rec.at("x0").get<double>();
      s.pose.y0 = rec.at("y0").get<double>();
      s.pose.theta = rec.value("theta0", 0.0);
    } catch (const nlohmann::json::exception& e) {
      throw parse_error(std::string("trajectory record: ") + e.what());
    }
    samples.push_back(s);
  }
  return Trajectory(std::move(samples));
}

}  // namespace vbsense::obstruction

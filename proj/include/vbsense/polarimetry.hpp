#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "vbsense/beam.hpp"
#include "vbsense/errors.hpp"
#include "vbsense/grid.hpp"
#include "vbsense/obstruction.hpp"

namespace vbsense::polarimetry {

/// Measurement polarizer angles, in pipeline channel order H, V, D, A.
inline constexpr std::array<double, 4> kChannelAngles = {
    0.0, std::numbers::pi / 2.0, std::numbers::pi / 4.0, 3.0 * std::numbers::pi / 4.0};

/// Linear-polarization Stokes triple. s3 is not part of the sensing
/// pipeline (the radial mode has s3 = 0); see stokes_from_schmidt for the
/// cross-validation path that computes it.
struct StokesVector {
  double s0 = 0, s1 = 0, s2 = 0;
  enum class Norm { raw, normalized } norm = Norm::raw;
  bool degenerate = false;  ///< beam fully covered (all intensities zero)
  bool reliable = true;     ///< false when s0 fell below the normalization floor
};

/// Linear polarizer at angle phi, applied pixelwise:
/// P_phi = [[cos^2, sin cos], [sin cos, sin^2]].
inline beam::VectorField project(const beam::VectorField& f, double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  beam::VectorField out = f;
  for (std::size_t k = 0; k < f.ex.size(); ++k) {
    const cplx amp = c * f.ex.data()[k] + s * f.ey.data()[k];
    out.ex.data()[k] = c * amp;
    out.ey.data()[k] = s * amp;
  }
  return out;
}

/// Transmitted power behind obstacle and polarizer:
/// int (1 - indicator) |P_phi E|^2 d2rho.
inline double intensity(const beam::VectorField& f, const obstruction::Obstacle& o, double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  const auto& g = f.geometry;
  double total = 0;
  for (std::size_t k = 0; k < f.ex.size(); ++k)
    total += std::norm(c * f.ex.data()[k] + s * f.ey.data()[k]);
  total *= g.cell_area();
  if (o.is_none()) return total;
  const obstruction::CoveragePatch p = obstruction::coverage_patch(o, g);
  double blocked = 0;
  for (int j = 0; j < p.c.ny(); ++j)
    for (int i = 0; i < p.c.nx(); ++i) {
      const double cov = p.c.at(i, j);
      if (cov == 0.0) continue;
      blocked += cov * std::norm(c * f.ex.at(p.i0 + i, p.j0 + j) + s * f.ey.at(p.i0 + i, p.j0 + j));
    }
  return total - blocked * g.cell_area();
}

/// Spatially resolved polarization tomography: the four projected intensity
/// images |P_phi E|^2 at phi in {0, 45, 90, 135} degrees.
struct Tomography {
  GridGeometry geometry;
  std::array<Array2D<double>, 4> images;  ///< channel order H, V, D, A
  std::array<double, 4> totals{};         ///< unobstructed integrals per channel

  void recompute_totals() {
    for (int c = 0; c < 4; ++c) {
      totals[c] = 0;
      for (const double v : images[c]) totals[c] += v;
      totals[c] *= geometry.cell_area();
    }
  }
};

inline Tomography tomography(const beam::VectorField& f) {
  Tomography t;
  t.geometry = f.geometry;
  for (int ch = 0; ch < 4; ++ch) {
    const double c = std::cos(kChannelAngles[ch]), s = std::sin(kChannelAngles[ch]);
    t.images[ch] = Array2D<double>(f.geometry.nx, f.geometry.ny);
    for (std::size_t k = 0; k < f.ex.size(); ++k)
      t.images[ch].data()[k] = std::norm(c * f.ex.data()[k] + s * f.ey.data()[k]);
  }
  t.recompute_totals();
  return t;
}

/// The four channel intensities behind an obstacle, evaluated from a
/// tomography. Identical to calling intensity() per channel but reuses the
/// projected images and the coverage patch.
inline std::array<double, 4> intensities(const Tomography& t, const obstruction::Obstacle& o) {
  std::array<double, 4> out = t.totals;
  if (o.is_none()) return out;
  const obstruction::CoveragePatch p = obstruction::coverage_patch(o, t.geometry);
  const double area = t.geometry.cell_area();
  for (int ch = 0; ch < 4; ++ch) {
    double blocked = 0;
    for (int j = 0; j < p.c.ny(); ++j)
      for (int i = 0; i < p.c.nx(); ++i) {
        const double cov = p.c.at(i, j);
        if (cov != 0.0) blocked += cov * t.images[ch].at(p.i0 + i, p.j0 + j);
      }
    out[ch] -= blocked * area;
  }
  return out;
}

inline std::array<double, 4> intensities(const beam::VectorField& f, const obstruction::Obstacle& o) {
  std::array<double, 4> out;
  for (int ch = 0; ch < 4; ++ch) out[ch] = intensity(f, o, kChannelAngles[ch]);
  return out;
}

/// Stokes triple from the four polarizer intensities:
/// s0 = I(0) + I(90), s1 = I(0) - I(90), s2 = I(45) - I(135).
/// Small negative inputs from detector noise are clamped at -1e-6 * s0.
inline StokesVector stokes_from_intensities(double i0, double i90, double i45, double i135) {
  StokesVector sv;
  double vals[4] = {i0, i90, i45, i135};
  const double scale = std::max({std::abs(i0) + std::abs(i90), std::abs(i45) + std::abs(i135)});
  if (scale == 0.0) {
    sv.degenerate = true;  // beam fully covered
    return sv;
  }
  for (double& v : vals) {
    if (v < 0) {
      if (v < -1e-6 * scale) sv.reliable = false;
      v = 0;
    }
  }
  sv.s0 = vals[0] + vals[1];
  sv.s1 = vals[0] - vals[1];
  sv.s2 = vals[2] - vals[3];
  if (sv.s0 <= 0) sv.degenerate = true;
  return sv;
}

inline StokesVector stokes_from_intensities(const std::array<double, 4>& i_hvda) {
  return stokes_from_intensities(i_hvda[0], i_hvda[1], i_hvda[2], i_hvda[3]);
}

/// Stokes parameters from a Schmidt decomposition. s3 is returned alongside
/// for cross-validation only; the sensing pipeline never uses it.
struct SchmidtStokes {
  StokesVector stokes;
  double s3 = 0;
};

inline SchmidtStokes stokes_from_schmidt(const beam::SchmidtDecomposition& d) {
  const cplx ax = d.u1[0], ay = d.u1[1];
  const double dl = d.lambda1 - d.lambda2;
  SchmidtStokes out;
  out.stokes.s0 = d.lambda1 + d.lambda2;
  out.stokes.s1 = dl * (std::norm(ax) - std::norm(ay));
  out.stokes.s2 = dl * 2.0 * std::real(ax * std::conj(ay));
  out.s3 = dl * 2.0 * std::imag(std::conj(ax) * ay);
  return out;
}

/// Series normalization used in the result plots: s0 to its initial value,
/// s1 and s2 to the instantaneous raw s0. Entries whose raw s0 is below
/// `floor_fraction` of the initial s0 are flagged unreliable, not divided.
inline std::vector<StokesVector> normalize(const std::vector<StokesVector>& series,
                                           double floor_fraction = 1e-3) {
  if (series.empty()) return {};
  const double s0_initial = series.front().s0;
  if (s0_initial <= 0) throw std::domain_error("normalize: first element must have s0 > 0");
  std::vector<StokesVector> out;
  out.reserve(series.size());
  for (const StokesVector& raw : series) {
    StokesVector n = raw;
    n.norm = StokesVector::Norm::normalized;
    n.s0 = raw.s0 / s0_initial;
    if (raw.s0 < floor_fraction * s0_initial) {
      n.reliable = false;
      n.s1 = 0;
      n.s2 = 0;
    } else {
      n.s1 = raw.s1 / raw.s0;
      n.s2 = raw.s2 / raw.s0;
    }
    out.push_back(n);
  }
  return out;
}

/// Stokes series CSV export: t_seconds, s0, s1, s2, reliability_flag.
inline void export_stokes_csv(const std::vector<double>& t, const std::vector<StokesVector>& s,
                              const std::string& path, const std::string& provenance = {}) {
  std::ofstream f(path);
  if (!f) throw parse_error("cannot open for writing: " + path);
  if (!provenance.empty()) f << "# " << provenance << "\n";
  f << "t_seconds,s0,s1,s2,reliability_flag\n";
  char buf[160];
  for (std::size_t k = 0; k < s.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%d\n",
                  k < t.size() ? t[k] : static_cast<double>(k), s[k].s0, s[k].s1, s[k].s2,
                  s[k].reliable ? 1 : 0);
    f << buf;
  }
}

}  // namespace vbsense::polarimetry

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "vbsense/errors.hpp"
#include "vbsense/grid.hpp"
#include "vbsense/io.hpp"

namespace vbsense::beam {

using std::numbers::pi;

enum class Axis { x, y };

/// Two-component transverse field (Jones vector per pixel) sampled on a grid.
struct VectorField {
  GridGeometry geometry;
  Array2D<cplx> ex, ey;  ///< amplitudes along x-hat / y-hat, dimensionless
  double wavelength = 0;  ///< m
  double z = 0;           ///< propagation-plane coordinate, m

  double power() const {
    double p = 0;
    for (std::size_t k = 0; k < ex.size(); ++k)
      p += std::norm(ex.data()[k]) + std::norm(ey.data()[k]);
    return p * geometry.cell_area();
  }

  Array2D<double> intensity() const {
    Array2D<double> out(geometry.nx, geometry.ny);
    for (std::size_t k = 0; k < ex.size(); ++k)
      out.data()[k] = std::norm(ex.data()[k]) + std::norm(ey.data()[k]);
    return out;
  }
};

/// Schmidt form of a two-component field: E = sqrt(l1) u1 v1 + sqrt(l2) u2 v2
/// with orthonormal polarization vectors u_k and orthonormal spatial modes v_k.
struct SchmidtDecomposition {
  double lambda1 = 0, lambda2 = 0;       ///< lambda1 >= lambda2 >= 0, power units
  std::array<cplx, 2> u1{}, u2{};        ///< unit Jones vectors
  Array2D<cplx> v1, v2;                  ///< unit-power spatial modes
  GridGeometry geometry;
};

namespace detail {

inline double hermite(int n, double u) {
  // physicists' Hermite polynomials by recurrence
  double h0 = 1.0, h1 = 2.0 * u;
  if (n == 0) return h0;
  if (n == 1) return h1;
  for (int k = 2; k <= n; ++k) {
    const double h2 = 2.0 * u * h1 - 2.0 * (k - 1) * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

inline double factorial(int n) {
  double f = 1;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

/// 90-10 knife-edge width of a sampled intensity profile along one axis.
inline double knife_edge_width(const Array2D<double>& inten, const GridGeometry& g, Axis axis) {
  const int n = (axis == Axis::x) ? g.nx : g.ny;
  std::vector<double> marginal(n, 0.0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      marginal[axis == Axis::x ? i : j] += inten.at(i, j);
  std::vector<double> cum(n);
  double total = 0;
  for (int k = 0; k < n; ++k) {
    total += marginal[k];
    cum[k] = total;
  }
  if (total <= 0) throw std::domain_error("knife_edge_width: zero-power field");
  const double pitch = (axis == Axis::x) ? g.dx : g.dy;
  auto crossing = [&](double frac) {
    const double target = frac * total;
    for (int k = 0; k < n; ++k) {
      if (cum[k] >= target) {
        const double prev = (k == 0) ? 0.0 : cum[k - 1];
        const double t = (target - prev) / (cum[k] - prev);
        // cum[k] is the power with the knife at the far edge of cell k
        return (k - 0.5 * (n - 1) - 0.5 + t) * pitch;
      }
    }
    return (0.5 * (n - 1)) * pitch;
  };
  return crossing(0.90) - crossing(0.10);
}

}  // namespace detail

/// Hermite-Gaussian mode psi_mn sampled on the grid, unit L2 power,
/// including Gouy phase and wavefront curvature for z != 0.
inline Array2D<cplx> hermite_gauss_mode(int m, int n, double waist, double wavelength,
                                        double z, const GridGeometry& g) {
  if (m < 0 || n < 0) throw config_error("hermite_gauss_mode: m, n must be >= 0");
  if (waist <= 0) throw config_error("hermite_gauss_mode: waist must be > 0");
  if (wavelength <= 0) throw config_error("hermite_gauss_mode: wavelength must be > 0");

  const double zr = pi * waist * waist / wavelength;
  const double w = waist * std::sqrt(1.0 + (z / zr) * (z / zr));
  const double inv_r = (z == 0) ? 0.0 : z / (z * z + zr * zr);
  const double gouy = (m + n + 1) * std::atan2(z, zr);
  const double k = 2.0 * pi / wavelength;
  const double amp = std::sqrt(2.0 / (pi * std::pow(2.0, m + n) *
                                      detail::factorial(m) * detail::factorial(n))) / w;

  Array2D<cplx> psi(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j) {
    const double y = g.y(j);
    for (int i = 0; i < g.nx; ++i) {
      const double x = g.x(i);
      const double r2 = x * x + y * y;
      const double mag = amp * detail::hermite(m, std::sqrt(2.0) * x / w) *
                         detail::hermite(n, std::sqrt(2.0) * y / w) * std::exp(-r2 / (w * w));
      const double phase = 0.5 * k * r2 * inv_r - gouy;
      psi.at(i, j) = std::polar(mag, phase);
    }
  }

  // bound truncation error: extent must cover >= 4x the mode's 90-10 width
  Array2D<double> inten(g.nx, g.ny);
  for (std::size_t q = 0; q < psi.size(); ++q) inten.data()[q] = std::norm(psi.data()[q]);
  const double wx = detail::knife_edge_width(inten, g, Axis::x);
  const double wy = detail::knife_edge_width(inten, g, Axis::y);
  if (g.extent_x() < 4.0 * wx || g.extent_y() < 4.0 * wy)
    throw config_error("hermite_gauss_mode: grid extent smaller than 4x the mode's 90-10 width");
  return psi;
}

/// Ideal radially polarized doughnut mode: (x-hat psi10 + y-hat psi01)/sqrt(2).
inline VectorField radial_mode(double waist, double wavelength, double z, const GridGeometry& g) {
  VectorField f;
  f.geometry = g;
  f.wavelength = wavelength;
  f.z = z;
  f.ex = hermite_gauss_mode(1, 0, waist, wavelength, z, g);
  f.ey = hermite_gauss_mode(0, 1, waist, wavelength, z, g);
  const double s = 1.0 / std::sqrt(2.0);
  for (auto& v : f.ex) v *= s;
  for (auto& v : f.ey) v *= s;
  return f;
}

/// Azimuthally polarized partner mode: (-x-hat psi01 + y-hat psi10)/sqrt(2).
inline VectorField azimuthal_mode(double waist, double wavelength, double z, const GridGeometry& g) {
  VectorField f;
  f.geometry = g;
  f.wavelength = wavelength;
  f.z = z;
  f.ex = hermite_gauss_mode(0, 1, waist, wavelength, z, g);
  f.ey = hermite_gauss_mode(1, 0, waist, wavelength, z, g);
  const double s = 1.0 / std::sqrt(2.0);
  for (auto& v : f.ex) v *= -s;
  for (auto& v : f.ey) v *= s;
  return f;
}

/// Schmidt decomposition via the 2x2 polarization coherency matrix
/// M_ij = int E_i E_j* d2rho, eigen-decomposed in closed form; spatial
/// modes follow by back-substitution v_k = (u_k^dag E)/sqrt(lambda_k).
inline SchmidtDecomposition schmidt_decompose(const VectorField& f) {
  const double area = f.geometry.cell_area();
  double mxx = 0, myy = 0;
  cplx mxy = 0;
  for (std::size_t k = 0; k < f.ex.size(); ++k) {
    mxx += std::norm(f.ex.data()[k]);
    myy += std::norm(f.ey.data()[k]);
    mxy += f.ex.data()[k] * std::conj(f.ey.data()[k]);
  }
  mxx *= area;
  myy *= area;
  mxy *= area;
  const double total = mxx + myy;
  if (total <= 0) throw std::domain_error("schmidt_decompose: zero-power field");

  SchmidtDecomposition d;
  d.geometry = f.geometry;
  const double disc = std::sqrt((mxx - myy) * (mxx - myy) + 4.0 * std::norm(mxy));
  d.lambda1 = 0.5 * (total + disc);
  d.lambda2 = std::max(0.0, 0.5 * (total - disc));

  if (std::abs(mxy) > 1e-15 * total) {
    const cplx a = mxy;
    const double b = d.lambda1 - mxx;
    const double n1 = std::sqrt(std::norm(a) + b * b);
    d.u1 = {a / n1, cplx(b / n1)};
    d.u2 = {cplx(-b / n1), std::conj(a) / n1};
  } else if (mxx >= myy) {
    d.u1 = {1.0, 0.0};
    d.u2 = {0.0, 1.0};
  } else {
    d.u1 = {0.0, 1.0};
    d.u2 = {1.0, 0.0};
  }

  auto project_mode = [&](const std::array<cplx, 2>& u, double lambda) {
    Array2D<cplx> v(f.geometry.nx, f.geometry.ny);
    if (lambda > 1e-12 * total) {
      const double s = 1.0 / std::sqrt(lambda);
      for (std::size_t k = 0; k < v.size(); ++k)
        v.data()[k] = (std::conj(u[0]) * f.ex.data()[k] + std::conj(u[1]) * f.ey.data()[k]) * s;
    }
    return v;
  };
  d.v1 = project_mode(d.u1, d.lambda1);
  d.v2 = project_mode(d.u2, d.lambda2);

  if (d.lambda2 <= 1e-12 * total) {
    // factorable field: complete the spatial basis with any unit mode
    // orthogonal to v1 so the decomposition invariants still hold
    Array2D<cplx> seed(f.geometry.nx, f.geometry.ny);
    for (int j = 0; j < f.geometry.ny; ++j)
      for (int i = 0; i < f.geometry.nx; ++i)
        seed.at(i, j) = f.geometry.x(i) * d.v1.at(i, j);
    cplx overlap = 0;
    for (std::size_t k = 0; k < seed.size(); ++k)
      overlap += seed.data()[k] * std::conj(d.v1.data()[k]);
    overlap *= area;
    double nrm = 0;
    for (std::size_t k = 0; k < seed.size(); ++k) {
      seed.data()[k] -= overlap * d.v1.data()[k];
      nrm += std::norm(seed.data()[k]);
    }
    nrm = std::sqrt(nrm * area);
    if (nrm > 1e-12) {
      for (auto& v : seed) v /= nrm;
      d.v2 = std::move(seed);
    }
    d.lambda2 = 0.0;
  }
  return d;
}

/// 90-10 knife-edge width of a field's intensity profile along an axis.
inline double measure_knife_edge_width(const VectorField& f, Axis axis) {
  return detail::knife_edge_width(f.intensity(), f.geometry, axis);
}

/// 256x256 grid spanning +-3x the given 90-10 width in both axes.
inline GridGeometry default_geometry_for_width(double width_90_10, int n = 256,
                                               double half_span_factor = 3.0) {
  if (width_90_10 <= 0) throw config_error("geometry: beam width must be > 0");
  const double pitch = 2.0 * half_span_factor * width_90_10 / n;
  return GridGeometry(n, n, pitch, pitch);
}

/// Waist of the given mode family whose 90-10 knife-edge width equals
/// `target_width`. Numerical fixed-point on measure_knife_edge_width; the
/// width is proportional to the waist at z = 0 so this converges fast.
template <typename ModeFn>
inline double calibrate_waist(double target_width, double wavelength, ModeFn make_mode,
                              double tol = 1e-6) {
  if (target_width <= 0) throw config_error("calibrate_waist: target width must be > 0");
  double waist = target_width;
  for (int it = 0; it < 30; ++it) {
    const GridGeometry g = default_geometry_for_width(2.0 * waist);
    const VectorField f = make_mode(waist, wavelength, g);
    const double measured = measure_knife_edge_width(f, Axis::x);
    const double next = waist * target_width / measured;
    if (std::abs(measured - target_width) < tol * target_width) return next;
    waist = next;
  }
  throw config_error("calibrate_waist: did not converge");
}

inline double calibrate_radial_waist(double target_width, double wavelength) {
  return calibrate_waist(target_width, wavelength,
                         [](double w, double lam, const GridGeometry& g) {
                           return radial_mode(w, lam, 0.0, g);
                         });
}

// ---- field snapshots (portable array format) ----

inline void save_field(const VectorField& f, const std::string& path) {
  io::ArrayFile a;
  a.geometry = f.geometry;
  a.meta = {{"kind", "field"}, {"wavelength", f.wavelength}, {"z", f.z}};
  a.plane_names = {"ex_re", "ex_im", "ey_re", "ey_im"};
  Array2D<double> p(f.geometry.nx, f.geometry.ny);
  auto push = [&](auto get) {
    for (std::size_t k = 0; k < p.size(); ++k) p.data()[k] = get(k);
    a.planes.push_back(p);
  };
  push([&](std::size_t k) { return f.ex.data()[k].real(); });
  push([&](std::size_t k) { return f.ex.data()[k].imag(); });
  push([&](std::size_t k) { return f.ey.data()[k].real(); });
  push([&](std::size_t k) { return f.ey.data()[k].imag(); });
  io::save_array_file(a, path);
}

inline VectorField load_field(const std::string& path) {
  const io::ArrayFile a = io::load_array_file(path);
  VectorField f;
  f.geometry = a.geometry;
  f.wavelength = a.meta.value("wavelength", 0.0);
  f.z = a.meta.value("z", 0.0);
  f.ex = Array2D<cplx>(a.geometry.nx, a.geometry.ny);
  f.ey = Array2D<cplx>(a.geometry.nx, a.geometry.ny);
  const auto& exr = a.plane("ex_re");
  const auto& exi = a.plane("ex_im");
  const auto& eyr = a.plane("ey_re");
  const auto& eyi = a.plane("ey_im");
  for (std::size_t k = 0; k < f.ex.size(); ++k) {
    f.ex.data()[k] = {exr.data()[k], exi.data()[k]};
    f.ey.data()[k] = {eyr.data()[k], eyi.data()[k]};
  }
  return f;
}

}  // namespace vbsense::beam

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "vbsense/errors.hpp"

namespace vbsense {

using cplx = std::complex<double>;

/// Uniform Cartesian sampling of the transverse plane. The beam axis is at
/// the physical origin, which coincides with the grid center.
struct GridGeometry {
  int nx = 0, ny = 0;      ///< pixel counts
  double dx = 0, dy = 0;   ///< pixel pitch (m)

  GridGeometry() = default;
  GridGeometry(int nx_, int ny_, double dx_, double dy_)
      : nx(nx_), ny(ny_), dx(dx_), dy(dy_) {
    if (nx < 8 || ny < 8) throw config_error("grid: nx, ny must be >= 8");
    if (dx <= 0 || dy <= 0) throw config_error("grid: dx, dy must be > 0");
  }

  /// Physical x coordinate of pixel column i (cell center).
  double x(int i) const { return (i - 0.5 * (nx - 1)) * dx; }
  /// Physical y coordinate of pixel row j (cell center).
  double y(int j) const { return (j - 0.5 * (ny - 1)) * dy; }

  double extent_x() const { return nx * dx; }
  double extent_y() const { return ny * dy; }
  double cell_area() const { return dx * dy; }

  bool operator==(const GridGeometry&) const = default;
};

/// Row-major 2D array, indexed (i, j) = (column/x, row/y).
template <typename T>
class Array2D {
 public:
  Array2D() = default;
  Array2D(int nx, int ny, T fill = T{})
      : nx_(nx), ny_(ny), data_(static_cast<std::size_t>(nx) * ny, fill) {}

  T& at(int i, int j) { return data_[static_cast<std::size_t>(j) * nx_ + i]; }
  const T& at(int i, int j) const { return data_[static_cast<std::size_t>(j) * nx_ + i]; }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

 private:
  int nx_ = 0, ny_ = 0;
  std::vector<T> data_;
};

/// Midpoint Riemann sum of a scalar array over the grid.
inline double integrate(const Array2D<double>& a, const GridGeometry& g) {
  double s = 0;
  for (const double v : a) s += v;
  return s * g.cell_area();
}

}  // namespace vbsense

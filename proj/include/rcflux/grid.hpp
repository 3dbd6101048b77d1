#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace rcflux {

/// Up to three integer coordinates; axes beyond the grid dimension are 0.
using Index3 = std::array<int, 3>;
using Point3 = std::array<double, 3>;

/// Cell-centred periodic grid over the torus D_L = [0,L)^d with m cells per
/// unit length. Cells are stored row-major with axis 0 (the e_1 direction)
/// varying slowest.
class PeriodicGrid {
 public:
  PeriodicGrid() = default;
  PeriodicGrid(int d, int L, int m);

  int dim() const { return d_; }
  int period() const { return L_; }
  int resolution() const { return m_; }
  int cells_per_axis() const { return n_; }
  std::size_t size() const { return size_; }
  double spacing() const { return 1.0 / m_; }
  double cell_volume() const { return cell_volume_; }
  double domain_volume() const { return domain_volume_; }

  /// Flat index of a cell; coordinates wrap modulo m*L.
  std::size_t flat(const Index3& c) const;
  Index3 coords(std::size_t cell) const;
  std::size_t neighbor(std::size_t cell, int axis, int dir) const {
    return dir > 0 ? plus_[axis][cell] : minus_[axis][cell];
  }
  Point3 center(std::size_t cell) const;

  /// Periodized Euclidean distance on the torus of side L.
  double torus_distance(const Point3& x, const Point3& y) const;
  /// Cells whose centres lie at torus distance < r from p, in ascending order.
  std::vector<std::size_t> cells_within(const Point3& p, double r) const;
  /// Cells of the unit cube Q_k = k + [0,1)^d.
  std::vector<std::size_t> cells_in_unit_cube(const Index3& k) const;

  /// Cyclic shift by `offset` cells: result[c + offset] = values[c].
  std::vector<double> shifted(const std::vector<double>& values, const Index3& offset) const;

  bool operator==(const PeriodicGrid& o) const { return d_ == o.d_ && L_ == o.L_ && m_ == o.m_; }

 private:
  int d_ = 0, L_ = 0, m_ = 0, n_ = 0;
  std::size_t size_ = 0;
  double cell_volume_ = 0.0, domain_volume_ = 0.0;
  std::array<std::size_t, 3> stride_{};
  std::array<std::vector<std::uint32_t>, 3> plus_, minus_;
};

/// Lattice points of Z^d ∩ [0,L)^d, flattened row-major.
std::size_t lattice_flat(int d, int L, const Index3& k);
Index3 lattice_coords(int d, int L, std::size_t k);
std::size_t lattice_size(int d, int L);

}  // namespace rcflux

#include "rcflux/grid.hpp"

#include <algorithm>
#include <cmath>

#include "rcflux/errors.hpp"

namespace rcflux {

namespace {

int wrap(int i, int n) {
  const int r = i % n;
  return r < 0 ? r + n : r;
}

}  // namespace

PeriodicGrid::PeriodicGrid(int d, int L, int m) : d_(d), L_(L), m_(m), n_(m * L) {
  if (d < 1 || d > 3) throw ConfigError("grid dimension must be 1, 2 or 3");
  if (L < 1 || m < 1) throw ConfigError("grid period and resolution must be positive");
  size_ = 1;
  for (int a = d_ - 1; a >= 0; --a) {
    stride_[a] = size_;
    size_ *= static_cast<std::size_t>(n_);
  }
  cell_volume_ = std::pow(spacing(), d_);
  domain_volume_ = std::pow(static_cast<double>(L_), d_);
  for (int a = 0; a < d_; ++a) {
    plus_[a].resize(size_);
    minus_[a].resize(size_);
    for (std::size_t c = 0; c < size_; ++c) {
      Index3 x = coords(c);
      Index3 p = x, q = x;
      p[a] += 1;
      q[a] -= 1;
      plus_[a][c] = static_cast<std::uint32_t>(flat(p));
      minus_[a][c] = static_cast<std::uint32_t>(flat(q));
    }
  }
}

std::size_t PeriodicGrid::flat(const Index3& c) const {
  std::size_t f = 0;
  for (int a = 0; a < d_; ++a) f += static_cast<std::size_t>(wrap(c[a], n_)) * stride_[a];
  return f;
}

Index3 PeriodicGrid::coords(std::size_t cell) const {
  Index3 x{0, 0, 0};
  for (int a = 0; a < d_; ++a) {
    x[a] = static_cast<int>(cell / stride_[a]);
    cell %= stride_[a];
  }
  return x;
}

Point3 PeriodicGrid::center(std::size_t cell) const {
  const Index3 x = coords(cell);
  Point3 p{0.0, 0.0, 0.0};
  for (int a = 0; a < d_; ++a) p[a] = (x[a] + 0.5) * spacing();
  return p;
}

double PeriodicGrid::torus_distance(const Point3& x, const Point3& y) const {
  double s = 0.0;
  for (int a = 0; a < d_; ++a) {
    double t = std::fmod(std::abs(x[a] - y[a]), static_cast<double>(L_));
    t = std::min(t, L_ - t);
    s += t * t;
  }
  return std::sqrt(s);
}

std::vector<std::size_t> PeriodicGrid::cells_within(const Point3& p, double r) const {
  std::array<std::vector<int>, 3> axis_cells;
  for (int a = 0; a < 3; ++a) {
    if (a >= d_) {
      axis_cells[a] = {0};
      continue;
    }
    const int lo = static_cast<int>(std::floor((p[a] - r) * m_ - 0.5)) - 1;
    const int hi = static_cast<int>(std::ceil((p[a] + r) * m_ - 0.5)) + 1;
    std::vector<int>& v = axis_cells[a];
    if (hi - lo + 1 >= n_) {
      for (int i = 0; i < n_; ++i) v.push_back(i);
    } else {
      for (int i = lo; i <= hi; ++i) v.push_back(wrap(i, n_));
      std::sort(v.begin(), v.end());
    }
  }
  std::vector<std::size_t> out;
  for (int i : axis_cells[0])
    for (int j : axis_cells[1])
      for (int k : axis_cells[2]) {
        const std::size_t c = flat({i, j, k});
        if (torus_distance(center(c), p) < r) out.push_back(c);
      }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> PeriodicGrid::cells_in_unit_cube(const Index3& k) const {
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(std::pow(m_, d_)));
  const int ni = m_, nj = d_ > 1 ? m_ : 1, nk = d_ > 2 ? m_ : 1;
  for (int i = 0; i < ni; ++i)
    for (int j = 0; j < nj; ++j)
      for (int l = 0; l < nk; ++l)
        out.push_back(flat({k[0] * m_ + i, d_ > 1 ? k[1] * m_ + j : 0, d_ > 2 ? k[2] * m_ + l : 0}));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> PeriodicGrid::shifted(const std::vector<double>& values, const Index3& offset) const {
  std::vector<double> out(values.size());
  for (std::size_t c = 0; c < size_; ++c) {
    Index3 x = coords(c);
    for (int a = 0; a < d_; ++a) x[a] += offset[a];
    out[flat(x)] = values[c];
  }
  return out;
}

std::size_t lattice_size(int d, int L) {
  std::size_t n = 1;
  for (int a = 0; a < d; ++a) n *= static_cast<std::size_t>(L);
  return n;
}

std::size_t lattice_flat(int d, int L, const Index3& k) {
  std::size_t f = 0;
  for (int a = 0; a < d; ++a) f = f * static_cast<std::size_t>(L) + static_cast<std::size_t>(wrap(k[a], L));
  return f;
}

Index3 lattice_coords(int d, int L, std::size_t k) {
  Index3 x{0, 0, 0};
  for (int a = d - 1; a >= 0; --a) {
    x[a] = static_cast<int>(k % static_cast<std::size_t>(L));
    k /= static_cast<std::size_t>(L);
  }
  return x;
}

}  // namespace rcflux

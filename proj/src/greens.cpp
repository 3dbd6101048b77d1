#include "rcflux/greens.hpp"

#include <cmath>
#include <ostream>

#include "rcflux/errors.hpp"

namespace rcflux {

GreenFunction solve_green(const CoefficientField& field, double beta, std::size_t y, const SolveConfig& cfg) {
  const PeriodicGrid& g = field.grid;
  if (y >= g.size()) throw ConfigError("source cell out of range");
  const DiscreteOperator op(field, beta);
  // Cell-integrated source: δ_y integrates to 1, the background to h^d / L^d.
  std::vector<double> rhs(g.size(), -g.cell_volume() / g.domain_volume());
  rhs[y] += 1.0;
  LinearSolveResult lin = solve_linear(op, rhs, cfg);
  return GreenFunction{g, y, beta, std::move(lin.x), lin.residual_norm, lin.iterations};
}

std::vector<DecayBin> decay_profile_3d(const GreenFunction& gf) {
  const PeriodicGrid& g = gf.grid;
  if (g.dim() != 3) throw ConfigError("decay profile requires d = 3");
  const double h = g.spacing();
  const Point3 y = g.center(gf.source);
  std::vector<DecayBin> bins;
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (c == gf.source) continue;
    const double r = g.torus_distance(g.center(c), y);
    const auto i = static_cast<std::size_t>(std::floor(std::log2(r / h) + 1e-12));
    while (bins.size() <= i) {
      const double lo = h * std::ldexp(1.0, static_cast<int>(bins.size()));
      bins.push_back({lo, 2.0 * lo, 0.0, 0});
    }
    DecayBin& b = bins[i];
    b.max_scaled = std::max(b.max_scaled, std::abs(gf.values[c]) * std::pow(r, g.dim() - 2));
    ++b.n_cells;
  }
  return bins;
}

void write_decay_csv(std::ostream& out, const std::vector<DecayBin>& bins) {
  out << "bin_lo,bin_hi,max_scaled_G,n_cells\n";
  char line[128];
  for (const DecayBin& b : bins) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%zu\n", b.lo, b.hi, b.max_scaled, b.n_cells);
    out << line;
  }
}

double annulus_gradient_energy_2d(const GreenFunction& gf, std::size_t x0, double R) {
  const PeriodicGrid& g = gf.grid;
  if (g.dim() != 2) throw ConfigError("annulus gradient energy requires d = 2");
  if (!(R > 0.0)) throw ConfigError("radius must be positive");
  const Point3 centre = g.center(x0);
  if (!(g.torus_distance(centre, g.center(gf.source)) > 2.0 * R))
    throw ConfigError("source must lie outside the ball of radius 2R");
  const double h = g.spacing();
  double s = 0.0;
  for (std::size_t c : g.cells_within(centre, R)) {
    for (int a = 0; a < 2; ++a) {
      const double fwd = (gf.values[g.neighbor(c, a, +1)] - gf.values[c]) / h;
      const double back = (gf.values[c] - gf.values[g.neighbor(c, a, -1)]) / h;
      s += 0.5 * (fwd * fwd + back * back);
    }
  }
  return s * g.cell_volume();
}

}  // namespace rcflux

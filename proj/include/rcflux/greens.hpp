#pragma once

#include <iosfwd>
#include <vector>

#include "rcflux/solver.hpp"

namespace rcflux {

/// Periodic Green's function G(·, y) of -div(a grad) + beta against the
/// source δ_y - |D_L|^{-1}; zero mean when beta = 0.
struct GreenFunction {
  PeriodicGrid grid;
  std::size_t source = 0;
  double beta = 0.0;
  std::vector<double> values;
  double residual_norm = 0.0;
  int iterations = 0;
};

/// The point mass is one cell of value 1/h^d.
GreenFunction solve_green(const CoefficientField& field, double beta, std::size_t y, const SolveConfig& cfg);

struct DecayBin {
  double lo = 0.0;
  double hi = 0.0;
  double max_scaled = 0.0;  // max |G(x,y)| dist(x,y)^{d-2} over the bin
  std::size_t n_cells = 0;
};

/// Dyadic bins [h 2^i, h 2^{i+1}) of torus distance to the source cell (d = 3).
std::vector<DecayBin> decay_profile_3d(const GreenFunction& g);

void write_decay_csv(std::ostream& out, const std::vector<DecayBin>& bins);

/// ∫_{B_R(x0)} |∇_x G(x,y)|² dx with face-difference gradients (d = 2,
/// dist(x0, y) > 2R).
double annulus_gradient_energy_2d(const GreenFunction& g, std::size_t x0, double R);

}  // namespace rcflux

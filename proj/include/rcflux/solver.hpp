#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "rcflux/fields.hpp"

namespace rcflux {

enum class Preconditioner { none, diagonal };

struct SolveConfig {
  double rel_tolerance = 1e-10;
  int max_iterations = 20000;
  Preconditioner preconditioner = Preconditioner::diagonal;

  void validate() const;
};

void to_json(nlohmann::json& j, const SolveConfig& c);
void from_json(const nlohmann::json& j, SolveConfig& c);

/// 2 / (1/a + 1/b).
inline double face_mean(double a, double b) { return 2.0 * a * b / (a + b); }

/// Matrix-free cell-centred finite-volume operator for
/// -div(a grad u) + beta u on the periodic grid, integrated over each cell:
///   (A u)_c = h^{d-2} Σ_faces k_f (u_c - u_nb) + beta h^d u_c,
/// with k_f the harmonic mean of the two adjacent cell values.
class DiscreteOperator {
 public:
  DiscreteOperator(CoefficientField field, double beta);

  void apply(std::span<const double> u, std::span<double> out) const;

  /// Conductivity of the face between `cell` and its +axis neighbour.
  double face_conductivity(int axis, std::size_t cell) const { return faces_[axis][cell]; }
  const std::vector<double>& diagonal() const { return diagonal_; }

  /// Cell-integrated right-hand side of the corrector equation,
  /// b_c = h^{d-1} (k_{c,+e1} - k_{c,-e1}).
  std::vector<double> corrector_rhs() const;

  double beta() const { return beta_; }
  const CoefficientField& field() const { return field_; }
  const PeriodicGrid& grid() const { return field_.grid; }

 private:
  CoefficientField field_;
  double beta_;
  double face_scale_;  // h^{d-2}
  double mass_;        // beta h^d
  std::array<std::vector<double>, 3> faces_;
  std::vector<double> diagonal_;
};

struct LinearSolveResult {
  std::vector<double> x;
  double residual_norm = 0.0;  // ||b - A x|| / ||b||, or 0 when b = 0
  int iterations = 0;
};

/// Preconditioned conjugate gradients. When beta = 0 the constant mode is
/// projected out of every iterate, so x has zero mean and b must have zero
/// mean up to round-off. `initial` is an optional starting guess.
/// Throws SolveError when max_iterations is reached.
LinearSolveResult solve_linear(const DiscreteOperator& op, std::span<const double> rhs, const SolveConfig& cfg,
                               std::span<const double> initial = {});

/// Periodic corrector φ and the derived flux.
struct CorrectorSolution {
  PeriodicGrid grid;
  std::vector<double> phi;
  double beta = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  double gamma_energy = 0.0;
  double gamma_linear = 0.0;

  /// The flux Γ; the energy form, which is second-order accurate in the solve error.
  double gamma() const { return gamma_energy; }
};

void to_json(nlohmann::json& j, const CorrectorSolution& s);

DiscreteOperator assemble(const CoefficientField& field, double beta);

CorrectorSolution solve_corrector(const CoefficientField& field, double beta, const SolveConfig& cfg,
                                  std::span<const double> initial = {});

/// |D_L|^{-1} ( Σ_faces k_f g_f² h^d + beta Σ_c φ_c² h^d ), g_f = Dφ + e_1·n_f.
double flux_energy(const CorrectorSolution& sol, const CoefficientField& field, double beta);
double flux_energy(std::span<const double> phi, const CoefficientField& field, double beta);

/// |D_L|^{-1} Σ_{faces normal to e_1} k_f (1 + Dφ) h^d.
double flux_linear(const CorrectorSolution& sol, const CoefficientField& field);
double flux_linear(std::span<const double> phi, const CoefficientField& field);

/// Face-reconstructed |∇φ + e_1|² per cell (mean of the squared face gradients on either side).
std::vector<double> cell_gradient_energy(std::span<const double> phi, const PeriodicGrid& grid);

struct PhiEnergies {
  double phi = 0.0;      // over the unit cube Q_j
  double phi_hat = 0.0;  // over the torus ball B_τ(j)
};

PhiEnergies phi_energies(const CorrectorSolution& sol, std::size_t j, double tau);

/// Flat binary dump: three int32 (d, L, m) then the row-major float64 values.
void write_phi_binary(const std::filesystem::path& path, const CorrectorSolution& sol);
std::vector<double> read_phi_binary(const std::filesystem::path& path, int& d, int& L, int& m);

}  // namespace rcflux

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rcflux {

/// Absolutely continuous test function with known derivative. `kinks` lists
/// the points where the derivative may jump; quadrature splits there.
struct TestFunction {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  std::vector<double> kinks;
  std::string description;

  static TestFunction identity();
  /// h(knots[0]) = value_at_first_knot; slopes[i] applies on
  /// (knots[i-1], knots[i]), slopes.front() left of the first knot and
  /// slopes.back() right of the last. slopes.size() == knots.size() + 1.
  static TestFunction piecewise_linear(std::vector<double> knots, std::vector<double> slopes,
                                       double value_at_first_knot);
};

/// Standard normal density and distribution function.
double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);

/// E h(Y), Y ~ N(0,1).
double normal_expectation(const TestFunction& h);

/// Solution of ψ'(x) - x ψ(x) = h(x) - E h(Y) sampled on a uniform grid over [-T, T].
struct SteinSolution {
  std::vector<double> grid;
  std::vector<double> psi, psi_prime, psi_dprime;
  double expectation = 0.0;  // E h(Y)
  /// |ψ(0)| mismatch between the sweeps from -∞ and from +∞.
  double continuity_gap = 0.0;
  std::string h_description;

  /// ψ and ψ' off the grid by cubic Hermite interpolation (linear continuation outside).
  double psi_at(double x) const;
  double psi_prime_at(double x) const;
  double max_abs_psi_prime() const;
  double max_abs_psi_dprime() const;
};

/// ψ(x) = e^{x²/2} ∫_{-∞}^x (h - E h) e^{-t²/2} dt for x <= 0 and
/// -e^{x²/2} ∫_x^∞ (h - E h) e^{-t²/2} dt for x > 0. ψ' and ψ'' follow
/// from the equation and its derivative. Requires T >= 6, n_grid >= 10^4.
SteinSolution solve_stein(const TestFunction& h, double T = 8.0, std::size_t n_grid = 16001);

/// max |ψ'_ref(x) - x ψ(x) - (h(x) - E h)| over the grid, where
/// ψ'_ref = x ψ_ref + h - E h and ψ_ref is built independently from h'
/// through the representation with Φ-weighted integrals of h'.
double stein_ode_residual(const SteinSolution& sol, const TestFunction& h);

/// ∫ |F_n(t) - Φ(t)| dt for the empirical CDF F_n of `samples`, evaluated
/// exactly piece by piece between order statistics. Requires >= 100 samples.
double wasserstein_to_normal(std::span<const double> samples);

/// ∫ |F(t) - Φ(t)| dt for the discrete law with the given atoms and
/// (unnormalized) weights.
double wasserstein_discrete_to_normal(std::span<const double> atoms, std::span<const double> weights);

/// (x - mean) / sd with the unbiased sample standard deviation.
std::vector<double> standardize(std::span<const double> samples);

struct CovarianceCheck {
  double lhs = 0.0;  // mean h(W) - E h(Y)
  double rhs = 0.0;  // mean ψ'(W) - W ψ(W)
  double se_lhs = 0.0;
  double se_rhs = 0.0;
};

CovarianceCheck covariance_representation_check(std::span<const double> w, const SteinSolution& sol,
                                                const TestFunction& h);

}  // namespace rcflux

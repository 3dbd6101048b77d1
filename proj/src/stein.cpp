#include "rcflux/stein.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "rcflux/errors.hpp"
#include "rcflux/stats.hpp"

namespace rcflux {

namespace {

using Gauss = boost::math::quadrature::gauss<double, 20>;

/// ∫_a^b f, split at the kinks that fall inside (a, b).
template <class F>
double integrate_pieces(F&& f, double a, double b, const std::vector<double>& kinks) {
  double total = 0.0, lo = a;
  for (double k : kinks) {
    if (k <= a || k >= b) continue;
    total += Gauss::integrate(f, lo, k);
    lo = k;
  }
  return total + Gauss::integrate(f, lo, b);
}

std::vector<double> sorted_kinks(const TestFunction& h) {
  std::vector<double> k = h.kinks;
  std::sort(k.begin(), k.end());
  return k;
}

/// Quadrature breakpoints covering [a, b]: uniform steps plus the kinks.
std::vector<double> breakpoints(double a, double b, double step, const std::vector<double>& kinks) {
  std::vector<double> pts;
  const auto n = static_cast<int>(std::ceil((b - a) / step));
  for (int i = 0; i <= n; ++i) pts.push_back(a + (b - a) * i / n);
  for (double k : kinks)
    if (k > a && k < b) pts.push_back(k);
  std::sort(pts.begin(), pts.end());
  return pts;
}

constexpr double kTail = 12.0;  // normal mass beyond is below 1e-32

}  // namespace

TestFunction TestFunction::identity() {
  return {[](double x) { return x; }, [](double) { return 1.0; }, {}, "h(x) = x"};
}

TestFunction TestFunction::piecewise_linear(std::vector<double> knots, std::vector<double> slopes,
                                            double value_at_first_knot) {
  if (knots.empty() || slopes.size() != knots.size() + 1)
    throw ConfigError("piecewise-linear test function needs one more slope than knots");
  std::sort(knots.begin(), knots.end());
  std::vector<double> values(knots.size());
  values[0] = value_at_first_knot;
  for (std::size_t i = 1; i < knots.size(); ++i) values[i] = values[i - 1] + slopes[i] * (knots[i] - knots[i - 1]);
  auto piece = [knots](double x) {
    return static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), x) - knots.begin());
  };
  TestFunction h;
  h.value = [knots, slopes, values, piece](double x) {
    const std::size_t i = piece(x);
    const std::size_t anchor = i == 0 ? 0 : i - 1;
    return values[anchor] + slopes[i] * (x - knots[anchor]);
  };
  h.derivative = [slopes, piece](double x) { return slopes[piece(x)]; };
  h.kinks = knots;
  h.description = "piecewise linear, " + std::to_string(knots.size()) + " knots";
  return h;
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

double normal_expectation(const TestFunction& h) {
  const std::vector<double> kinks = sorted_kinks(h);
  const std::vector<double> pts = breakpoints(-kTail, kTail, 0.5, kinks);
  auto f = [&](double t) { return h.value(t) * normal_pdf(t); };
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += Gauss::integrate(f, pts[i], pts[i + 1]);
  return s;
}

SteinSolution solve_stein(const TestFunction& h, double T, std::size_t n_grid) {
  if (!(T >= 6.0)) throw ConfigError("Stein grid half-width must be >= 6");
  if (n_grid < 10000) throw ConfigError("Stein grid needs at least 10^4 points");
  SteinSolution sol;
  sol.h_description = h.description;
  sol.expectation = normal_expectation(h);
  const double eh = sol.expectation;
  const std::vector<double> kinks = sorted_kinks(h);
  auto g = [&](double t) { return h.value(t) - eh; };

  sol.grid.resize(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i)
    sol.grid[i] = -T + 2.0 * T * static_cast<double>(i) / static_cast<double>(n_grid - 1);
  sol.psi.assign(n_grid, 0.0);

  // Left sweep: I(x) = ∫_{-∞}^x g(t) e^{(x²-t²)/2} dt for x <= 0. Every
  // factor e^{(x_{i+1}² - x_i²)/2} is <= 1 because |x| decreases.
  auto left_step = [&](double a, double b, double acc) {
    auto f = [&](double t) { return g(t) * std::exp(0.5 * (b * b - t * t)); };
    return std::exp(0.5 * (b * b - a * a)) * acc + integrate_pieces(f, a, b, kinks);
  };
  double acc = 0.0;
  for (double a = -T - kTail; a < -T - 1e-12; a += 0.25) acc = left_step(a, std::min(a + 0.25, -T), acc);
  std::size_t zero = 0;
  while (zero + 1 < n_grid && sol.grid[zero + 1] <= 0.0) ++zero;
  sol.psi[0] = acc;
  for (std::size_t i = 1; i <= zero; ++i) sol.psi[i] = acc = left_step(sol.grid[i - 1], sol.grid[i], acc);
  const double psi_zero_left = zero + 1 < n_grid && sol.grid[zero] < 0.0
                                   ? left_step(sol.grid[zero], 0.0, acc)
                                   : sol.psi[zero];

  // Right sweep: J(x) = ∫_x^∞ g(t) e^{(x²-t²)/2} dt, ψ = -J for x > 0.
  auto right_step = [&](double a, double b, double acc_b) {
    auto f = [&](double t) { return g(t) * std::exp(0.5 * (a * a - t * t)); };
    return std::exp(0.5 * (a * a - b * b)) * acc_b + integrate_pieces(f, a, b, kinks);
  };
  acc = 0.0;
  for (double b = T + kTail; b > T + 1e-12; b -= 0.25) acc = right_step(std::max(b - 0.25, T), b, acc);
  sol.psi[n_grid - 1] = -acc;
  for (std::size_t i = n_grid - 1; i > zero + 1; --i) {
    acc = right_step(sol.grid[i - 1], sol.grid[i], acc);
    sol.psi[i - 1] = -acc;
  }
  const double psi_zero_right = -right_step(0.0, sol.grid[zero + 1], acc);
  sol.continuity_gap = std::abs(psi_zero_left - psi_zero_right);

  sol.psi_prime.resize(n_grid);
  sol.psi_dprime.resize(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i) {
    const double x = sol.grid[i];
    sol.psi_prime[i] = x * sol.psi[i] + g(x);
    sol.psi_dprime[i] = sol.psi[i] + x * sol.psi_prime[i] + h.derivative(x);
  }
  return sol;
}

double SteinSolution::psi_at(double x) const {
  const std::size_t n = grid.size();
  if (x <= grid.front()) return psi.front() + psi_prime.front() * (x - grid.front());
  if (x >= grid.back()) return psi.back() + psi_prime.back() * (x - grid.back());
  const double step = grid[1] - grid[0];
  const auto i = std::min(static_cast<std::size_t>((x - grid.front()) / step), n - 2);
  const double s = (x - grid[i]) / step;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  return h00 * psi[i] + h10 * step * psi_prime[i] + h01 * psi[i + 1] + h11 * step * psi_prime[i + 1];
}

double SteinSolution::psi_prime_at(double x) const {
  const std::size_t n = grid.size();
  if (x <= grid.front()) return psi_prime.front();
  if (x >= grid.back()) return psi_prime.back();
  const double step = grid[1] - grid[0];
  const auto i = std::min(static_cast<std::size_t>((x - grid.front()) / step), n - 2);
  const double s = (x - grid[i]) / step;
  const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
  const double d01 = -6 * s * s + 6 * s, d11 = 3 * s * s - 2 * s;
  return (d00 * psi[i] + d01 * psi[i + 1]) / step + d10 * psi_prime[i] + d11 * psi_prime[i + 1];
}

double SteinSolution::max_abs_psi_prime() const {
  double m = 0.0;
  for (double v : psi_prime) m = std::max(m, std::abs(v));
  return m;
}

double SteinSolution::max_abs_psi_dprime() const {
  double m = 0.0;
  for (double v : psi_dprime) m = std::max(m, std::abs(v));
  return m;
}

double stein_ode_residual(const SteinSolution& sol, const TestFunction& h) {
  // ψ_ref(w) = -√(2π) e^{w²/2} [ (1-Φ(w)) A(w) + Φ(w) B(w) ],
  // A(w) = ∫_{-∞}^w h'Φ, B(w) = ∫_w^∞ h'(1-Φ).
  const std::vector<double> kinks = sorted_kinks(h);
  const std::vector<double>& x = sol.grid;
  const std::size_t n = x.size();
  auto fa = [&](double t) { return h.derivative(t) * normal_cdf(t); };
  auto fb = [&](double t) { return h.derivative(t) * 0.5 * std::erfc(t / std::numbers::sqrt2); };

  std::vector<double> A(n), B(n);
  double acc = 0.0;
  const std::vector<double> left = breakpoints(x.front() - kTail, x.front(), 0.5, kinks);
  for (std::size_t i = 0; i + 1 < left.size(); ++i) acc += Gauss::integrate(fa, left[i], left[i + 1]);
  A[0] = acc;
  for (std::size_t i = 1; i < n; ++i) A[i] = acc += integrate_pieces(fa, x[i - 1], x[i], kinks);
  acc = 0.0;
  const std::vector<double> right = breakpoints(x.back(), x.back() + kTail, 0.5, kinks);
  for (std::size_t i = 0; i + 1 < right.size(); ++i) acc += Gauss::integrate(fb, right[i], right[i + 1]);
  B[n - 1] = acc;
  for (std::size_t i = n - 1; i > 0; --i) B[i - 1] = acc += integrate_pieces(fb, x[i - 1], x[i], kinks);

  const double root2pi = std::sqrt(2.0 * std::numbers::pi);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = x[i];
    const double e = std::exp(0.5 * w * w);
    const double upper = 0.5 * std::erfc(w / std::numbers::sqrt2);  // 1 - Φ(w)
    const double lower = 0.5 * std::erfc(-w / std::numbers::sqrt2);  // Φ(w)
    const double psi_ref = -root2pi * (e * upper * A[i] + e * lower * B[i]);
    const double g = h.value(w) - sol.expectation;
    const double psi_prime_ref = w * psi_ref + g;
    worst = std::max(worst, std::abs(psi_prime_ref - w * sol.psi[i] - g));
  }
  return worst;
}

double wasserstein_discrete_to_normal(std::span<const double> atoms, std::span<const double> weights) {
  if (atoms.empty() || atoms.size() != weights.size()) throw ConfigError("atoms and weights must match and be non-empty");
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
  double mass = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("weights must be non-negative");
    mass += w;
  }
  if (!(mass > 0.0)) throw ConfigError("weights must have positive mass");
  // P(t) = ∫ Φ = t Φ(t) + φ(t).
  auto P = [](double t) { return t * normal_cdf(t) + normal_pdf(t); };
  // ∫_a^b |c - Φ(t)| dt for a <= b.
  auto piece = [&](double a, double b, double c) {
    if (b <= a) return 0.0;
    auto signed_part = [&](double lo, double hi) { return c * (hi - lo) - (P(hi) - P(lo)); };
    if (normal_cdf(a) < c && c < normal_cdf(b)) {
      const double t = std::clamp(normal_quantile(c), a, b);
      return signed_part(a, t) - signed_part(t, b);
    }
    return std::abs(signed_part(a, b));
  };
  const double x0 = atoms[order.front()];
  const double xn = atoms[order.back()];
  double total = P(x0);
  total += normal_pdf(xn) - xn * 0.5 * std::erfc(xn / std::numbers::sqrt2);
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    cum += weights[order[i]] / mass;
    total += piece(atoms[order[i]], atoms[order[i + 1]], cum);
  }
  return total;
}

double wasserstein_to_normal(std::span<const double> samples) {
  if (samples.size() < 100) throw ConfigError("Wasserstein estimate needs at least 100 samples");
  const std::vector<double> w(samples.size(), 1.0);
  return wasserstein_discrete_to_normal(samples, w);
}

std::vector<double> standardize(std::span<const double> samples) {
  const SampleMoments m = sample_moments(samples);
  const double sd = std::sqrt(m.variance);
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = sd > 0.0 ? (samples[i] - m.mean) / sd : 0.0;
  return out;
}

CovarianceCheck covariance_representation_check(std::span<const double> w, const SteinSolution& sol,
                                                const TestFunction& h) {
  std::vector<double> left(w.size()), right(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    left[i] = h.value(w[i]) - sol.expectation;
    right[i] = sol.psi_prime_at(w[i]) - w[i] * sol.psi_at(w[i]);
  }
  const SampleMoments ml = sample_moments(left), mr = sample_moments(right);
  return {ml.mean, mr.mean, ml.se_mean, mr.se_mean};
}

}  // namespace rcflux

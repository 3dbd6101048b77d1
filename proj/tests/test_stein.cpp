#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rcflux/errors.hpp"
#include "rcflux/stein.hpp"

using namespace rcflux;

namespace {

TestFunction random_lipschitz(std::mt19937_64& eng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> count(1, 6);
  const int k = count(eng);
  std::vector<double> knots(k), slopes(k + 1);
  for (double& x : knots) x = 3.0 * u(eng);
  for (double& s : slopes) s = u(eng);
  return TestFunction::piecewise_linear(knots, slopes, u(eng));
}

}  // namespace

TEST_CASE("normal helpers") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  for (double p : {1e-10, 0.01, 0.3, 0.5, 0.9, 1 - 1e-9}) CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  const TestFunction abs = TestFunction::piecewise_linear({0.0}, {-1.0, 1.0}, 0.0);
  CHECK(normal_expectation(abs) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-13));
  CHECK(std::abs(normal_expectation(TestFunction::identity())) < 1e-14);
}

TEST_CASE("piecewise-linear test functions") {
  const TestFunction h = TestFunction::piecewise_linear({-1.0, 1.0}, {0.0, 1.0, 0.0}, -1.0);
  CHECK(h.value(-3.0) == doctest::Approx(-1.0));
  CHECK(h.value(0.5) == doctest::Approx(0.5));
  CHECK(h.value(4.0) == doctest::Approx(1.0));
  CHECK(h.derivative(0.0) == 1.0);
  CHECK(h.derivative(2.0) == 0.0);
  CHECK_THROWS_AS(TestFunction::piecewise_linear({0.0}, {1.0}, 0.0), ConfigError);
}

TEST_CASE("identity has the constant solution -1") {
  const SteinSolution s = solve_stein(TestFunction::identity());
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    CHECK(s.psi[i] == doctest::Approx(-1.0).epsilon(1e-10));
    CHECK(std::abs(s.psi_prime[i]) < 1e-9);
  }
  CHECK(s.max_abs_psi_prime() <= std::sqrt(2.0 / std::numbers::pi));
}

TEST_CASE("absolute value matches the closed form") {
  const TestFunction h = TestFunction::piecewise_linear({0.0}, {-1.0, 1.0}, 0.0);
  const SteinSolution s = solve_stein(h);
  const double c = std::sqrt(2.0 / std::numbers::pi), r = std::sqrt(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < s.grid.size(); i += 97) {
    const double x = s.grid[i];
    const double ref = x <= 0 ? 1.0 - c * r * normal_cdf(x) * std::exp(0.5 * x * x)
                              : -(1.0 - c * r * normal_cdf(-x) * std::exp(0.5 * x * x));
    CHECK(s.psi[i] == doctest::Approx(ref).epsilon(1e-9).scale(1.0));
  }
  CHECK(s.continuity_gap < 1e-12);
}

TEST_CASE("odd bounded h gives an even solution") {
  const TestFunction h = TestFunction::piecewise_linear({-1.0, 1.0}, {0.0, 1.0, 0.0}, -1.0);
  const SteinSolution s = solve_stein(h);
  const std::size_t n = s.grid.size();
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(s.psi[i] - s.psi[n - 1 - i]) < 1e-8);
}

TEST_CASE("derivative bounds and residual for random Lipschitz h") {
  std::mt19937_64 eng(31);
  for (int r = 0; r < 10; ++r) {
    const TestFunction h = random_lipschitz(eng);
    const SteinSolution s = solve_stein(h);
    CHECK(stein_ode_residual(s, h) <= 1e-8);
    CHECK(s.max_abs_psi_prime() <= std::sqrt(2.0 / std::numbers::pi) + 1e-3);
    CHECK(s.max_abs_psi_dprime() <= 2.0 + 1e-3);
  }
}

TEST_CASE("stein solver preconditions") {
  CHECK_THROWS_AS(solve_stein(TestFunction::identity(), 5.0), ConfigError);
  CHECK_THROWS_AS(solve_stein(TestFunction::identity(), 8.0, 5000), ConfigError);
}

TEST_CASE("interpolation follows the grid") {
  const TestFunction h = TestFunction::piecewise_linear({0.3}, {0.5, -0.2}, 0.1);
  const SteinSolution s = solve_stein(h);
  CHECK(s.psi_at(s.grid[1234]) == doctest::Approx(s.psi[1234]));
  const double x = 0.5 * (s.grid[9000] + s.grid[9001]);
  CHECK(s.psi_at(x) == doctest::Approx(0.5 * (s.psi[9000] + s.psi[9001])).epsilon(1e-6));
}

TEST_CASE("Wasserstein distance of a point mass is E|Y|") {
  const std::vector<double> zeros(200, 0.0);
  CHECK(wasserstein_to_normal(zeros) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-12));
  CHECK_THROWS_AS(wasserstein_to_normal(std::vector<double>(99, 0.0)), ConfigError);
}

TEST_CASE("Wasserstein distance of two symmetric atoms") {
  const double phi1 = normal_pdf(1.0), phi0 = normal_pdf(0.0), Phi1 = normal_cdf(1.0);
  const double exact = 2.0 * (2.0 * Phi1 - 1.5 - phi0 + 2.0 * phi1);
  const std::vector<double> atoms{-1.0, 1.0}, w{0.5, 0.5};
  CHECK(wasserstein_discrete_to_normal(atoms, w) == doctest::Approx(exact).epsilon(1e-12));
  std::vector<double> samples;
  for (int i = 0; i < 100; ++i) samples.push_back(i % 2 ? 1.0 : -1.0);
  CHECK(wasserstein_to_normal(samples) == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("normal samples sit at the sampling floor") {
  std::mt19937_64 eng(3);
  std::normal_distribution<double> normal;
  std::vector<double> x(10000);
  for (double& v : x) v = normal(eng);
  const double d = wasserstein_to_normal(standardize(x));
  CHECK(d <= 0.03);
  std::vector<double> shifted = x;
  for (double& v : shifted) v += 0.2;
  CHECK(std::abs(wasserstein_to_normal(shifted) - wasserstein_to_normal(x)) <= 0.2 + 1e-12);
}

TEST_CASE("standardize") {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  const auto z = standardize(x);
  double m = 0, v = 0;
  for (double t : z) m += t;
  for (double t : z) v += t * t;
  CHECK(std::abs(m) < 1e-14);
  CHECK(v / 3.0 == doctest::Approx(1.0));
}

TEST_CASE("covariance representation holds sample by sample") {
  std::mt19937_64 eng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> w(500);
  for (double& x : w) x = u(eng);
  const TestFunction h = TestFunction::piecewise_linear({-0.5, 1.0}, {0.2, -1.0, 0.7}, 0.0);
  const SteinSolution s = solve_stein(h);
  const CovarianceCheck c = covariance_representation_check(w, s, h);
  CHECK(std::abs(c.lhs - c.rhs) < 1e-6);
  CHECK(c.se_lhs > 0.0);
}

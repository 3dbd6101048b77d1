#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "rcflux/errors.hpp"
#include "rcflux/resample.hpp"

using namespace rcflux;

namespace {

FieldConfig checkerboard(int L, double p = 0.5) {
  FieldConfig c;
  c.L = L;
  c.checkerboard.p = p;
  return c;
}

double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

}  // namespace

TEST_CASE("subset weights form a probability measure") {
  for (std::size_t n = 1; n <= 12; ++n) {
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) total += binomial(static_cast<int>(n) - 1, static_cast<int>(s)) * subset_weight(n, s);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(subset_weight(3, 0) == doctest::Approx(1.0 / 3));
  CHECK(subset_weight(3, 1) == doctest::Approx(1.0 / 6));
  CHECK(subset_weight(3, 2) == doctest::Approx(1.0 / 3));
}

TEST_CASE("subset sampler frequencies") {
  Engine eng(17);
  std::map<std::vector<std::size_t>, int> counts;
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) {
    auto A = sample_subset_A(4, 2, eng);
    std::sort(A.begin(), A.end());
    for (std::size_t a : A) CHECK_FALSE(a == 2u);
    ++counts[A];
  }
  CHECK(counts.size() == 8u);
  for (const auto& [A, n] : counts) {
    const double p = subset_weight(4, A.size());
    CHECK(std::abs(n / double(draws) - p) < 4.0 * std::sqrt(p * (1 - p) / draws));
  }
  CHECK_THROWS_AS(sample_subset_A(3, 3, eng), ConfigError);
}

TEST_CASE("Chatterjee identity by enumeration") {
  std::mt19937_64 eng(5);
  std::normal_distribution<double> normal;
  for (std::size_t n = 1; n <= 4; ++n)
    for (double q : {0.3, 0.5, 0.8}) {
      std::vector<double> g(std::size_t{1} << n), f(g.size());
      for (auto& x : g) x = normal(eng);
      for (auto& x : f) x = normal(eng);
      const IdentitySides s = chatterjee_identity_exact(g, f, n, q);
      CHECK(std::abs(s.lhs - s.rhs) < 1e-12);
      // g = f gives the variance, computed directly.
      double m = 0, m2 = 0;
      for (std::size_t z = 0; z < g.size(); ++z) {
        double p = 1;
        for (std::size_t i = 0; i < n; ++i) p *= (z >> i & 1) ? q : 1 - q;
        m += p * g[z];
        m2 += p * g[z] * g[z];
      }
      const IdentitySides v = chatterjee_identity_exact(g, g, n, q);
      CHECK(v.lhs == doctest::Approx(m2 - m * m).epsilon(1e-12));
      CHECK(v.rhs == doctest::Approx(m2 - m * m).epsilon(1e-12));
    }
  std::vector<double> bad(3);
  CHECK_THROWS_AS(chatterjee_identity_exact(bad, bad, 2, 0.5), ConfigError);
  std::vector<double> big(32);
  CHECK_THROWS_AS(chatterjee_identity_exact(big, big, 5, 0.5), ConfigError);
}

TEST_CASE("identical resample gives zero difference") {
  ResampleTriple t = ResampleTriple::sample(checkerboard(4), 0.0, SolveConfig{}, 3);
  t.z_prime = t.z;
  t.z_dprime = t.z;
  CHECK(delta_j_gamma_direct(t, 5) == 0.0);
  CHECK(delta_j_gamma_local(t, 5) == 0.0);
  CHECK(*delta_kj_gamma(t, 1, 9).delta2_gamma == 0.0);
}

TEST_CASE("a redraw that repeats the site value gives exactly zero difference") {
  int repeats = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const ResampleTriple t = ResampleTriple::sample(checkerboard(4), 0.0, SolveConfig{}, seed);
    for (std::size_t j = 0; j < 16; ++j) {
      if (delta_j_gamma_local(t, j) != 0.0) continue;
      ++repeats;
      CHECK(delta_j_gamma_direct(t, j) == 0.0);
    }
  }
  CHECK(repeats > 0);
}

TEST_CASE("local and direct differences agree") {
  for (std::uint64_t seed = 0; seed < 6; ++seed)
    for (double beta : {0.0, 0.2}) {
      FieldConfig c = checkerboard(4);
      c.checkerboard.law = CheckerboardLaw::uniform;
      const ResampleTriple t = ResampleTriple::sample(c, beta, SolveConfig{}, seed);
      const std::size_t j = seed % 16;
      const DifferenceRecord r = delta_j_record(t, j);
      CHECK(std::abs(*r.delta_gamma_local - r.delta_gamma) <= 1e-7 * std::abs(r.gamma));
      CHECK(r.delta_gamma == doctest::Approx(delta_j_gamma_direct(t, j)).epsilon(1e-12));
    }
}

TEST_CASE("local identity holds for pores") {
  FieldConfig c;
  c.model = Model::poisson_pores;
  c.L = 4;
  c.poisson.mu = 1.0;
  const ResampleTriple t = ResampleTriple::sample(c, 0.0, SolveConfig{}, 12);
  for (std::size_t j : {0u, 6u, 15u}) {
    const DifferenceRecord r = delta_j_record(t, j);
    CHECK(std::abs(*r.delta_gamma_local - r.delta_gamma) <= 1e-7 * std::abs(r.gamma));
  }
}

TEST_CASE("single-site bound holds on records") {
  const FieldConfig c = checkerboard(4);
  CHECK(single_site_constant(c) == doctest::Approx(12.0));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DifferenceRecord r = delta_j_record(ResampleTriple::sample(c, 0.0, SolveConfig{}, seed), seed);
    CHECK(16.0 * std::abs(r.delta_gamma) <= r.bound);
    REQUIRE(r.phi_hat.size() == 2u);
    const nlohmann::json j = r;
    CHECK(j.at("delta_gamma").get<double>() == r.delta_gamma);
    CHECK_FALSE(j.contains("k"));
  }
}

TEST_CASE("raising the coefficient where the gradients align raises the flux") {
  // With φ and φ^j frozen, the integrand of the local form is linear in Δ_j a.
  FieldConfig c = checkerboard(4, 0.0);
  ResampleTriple t = ResampleTriple::sample(c, 0.0, SolveConfig{}, 1);
  t.z_prime = t.z;
  t.z_prime.sites[5].value = c.a_hi;
  CHECK(delta_j_gamma_direct(t, 5) > 0.0);
  CHECK(delta_j_gamma_local(t, 5) > 0.0);
}

TEST_CASE("second difference is symmetric in the order of resampling") {
  const ResampleTriple t = ResampleTriple::sample(checkerboard(4), 0.0, SolveConfig{}, 8);
  ResampleTriple swapped = t;
  std::swap(swapped.z_prime, swapped.z_dprime);
  const DifferenceRecord a = delta_kj_gamma(t, 3, 12), b = delta_kj_gamma(swapped, 12, 3);
  CHECK(std::abs(*a.delta2_gamma - *b.delta2_gamma) <= 1e-13 * std::abs(a.gamma));
  CHECK(a.phi_hat.size() == 8u);
  CHECK(*a.k == 3u);
}

TEST_CASE("far-separated second differences obey the bound") {
  const FieldConfig c = checkerboard(8);
  const std::size_t j = lattice_flat(2, 8, {0, 0, 0}), k = lattice_flat(2, 8, {4, 4, 0});
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SecondDifferenceAudit a = second_difference_audit(ResampleTriple::sample(c, 0.0, SolveConfig{}, seed), k, j);
    CHECK(a.lhs <= second_difference_constant(c) * a.rhs);
  }
  CHECK_THROWS_AS(second_difference_audit(ResampleTriple::sample(c, 0.0, SolveConfig{}, 0), lattice_flat(2, 8, {1, 1, 0}), j),
                  ConfigError);
}

TEST_CASE("Efron-Stein on a deterministic field is zero") {
  EfronSteinOptions opt;
  const EfronSteinEstimate e = efron_stein_estimate(checkerboard(4, 1.0), 5, opt);
  CHECK(e.var_hat == 0.0);
  CHECK(e.bound_hat == 0.0);
  CHECK(e.replicas == 5u);
  CHECK_THROWS_AS(efron_stein_estimate(checkerboard(4), 1, opt), ConfigError);
}

TEST_CASE("Efron-Stein inequality on a small ensemble") {
  EfronSteinOptions opt;
  opt.seed = 4;
  const EfronSteinEstimate e = efron_stein_estimate(checkerboard(4), 60, opt);
  CHECK(e.var_hat <= e.bound_hat + 3.0 * std::hypot(e.se_var, e.se_bound));
  opt.subsample_j = true;
  const EfronSteinEstimate s = efron_stein_estimate(checkerboard(4), 60, opt);
  CHECK(s.subsampled);
  CHECK(s.var_hat == doctest::Approx(e.var_hat));
}

TEST_CASE("Efron-Stein for independent resistors is near the delta-method variance") {
  FieldConfig c;
  c.model = Model::series_resistor;
  c.d = 1;
  c.L = 32;
  c.m = 1;
  EfronSteinOptions opt;
  opt.seed = 2;
  const EfronSteinEstimate e = efron_stein_estimate(c, 200, opt);
  // Γ = 1/S with S the mean of u = 1/a; Var Γ ≈ Var(u) / (L E[u]^4).
  const double u1 = 1.0 / c.a_lo, u2 = 1.0 / c.a_hi, p = c.series.p;
  const double eu = p * u2 + (1 - p) * u1, vu = p * (1 - p) * (u1 - u2) * (u1 - u2);
  const double delta_var = vu / (c.L * std::pow(eu, 4));
  CHECK(e.bound_hat <= 4.0 * delta_var);
  CHECK(e.bound_hat >= delta_var / 4.0);
}

TEST_CASE("normal bound estimate") {
  NormalBoundParams p;
  p.outer = 20;
  p.inner = 4;
  p.sigma_replicas = 100;
  p.bootstrap = 20;
  p.seed = 9;
  const NormalBoundEstimate e = normal_bound_estimate(checkerboard(2), p);
  CHECK_FALSE(e.degenerate);
  CHECK(e.term1 > 0.0);
  CHECK(e.term2 >= 0.0);
  CHECK(e.dW_bound == doctest::Approx(e.term1 + e.term2));
  CHECK(e.dW_empirical > 0.0);
  CHECK(e.combined_se > 0.0);
  CHECK(normal_bound_estimate(checkerboard(2, 1.0), p).degenerate);
  p.outer = 5;
  CHECK_THROWS_AS(normal_bound_estimate(checkerboard(2), p), ConfigError);
}

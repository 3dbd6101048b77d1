#include "rcflux/resample.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>

#include "rcflux/errors.hpp"
#include "rcflux/parallel.hpp"
#include "rcflux/stats.hpp"
#include "rcflux/stein.hpp"

namespace rcflux {

ResampleTriple ResampleTriple::sample(const FieldConfig& config, double beta, const SolveConfig& solve,
                                      std::uint64_t seed) {
  return {sample_latent(config, derive_seed(seed, {0})), sample_latent(config, derive_seed(seed, {1})),
          sample_latent(config, derive_seed(seed, {2})), config, beta, solve};
}

void to_json(nlohmann::json& j, const DifferenceRecord& r) {
  j = nlohmann::json{{"j", r.j}, {"gamma", r.gamma}, {"delta_gamma", r.delta_gamma}, {"phi_hat", r.phi_hat},
                     {"bound", r.bound}};
  if (r.k) j["k"] = *r.k;
  if (r.delta_gamma_local) j["delta_gamma_local"] = *r.delta_gamma_local;
  if (r.delta2_gamma) j["delta2_gamma"] = *r.delta2_gamma;
}

double single_site_constant(const FieldConfig& config) {
  const auto [lo, hi] = config.bounds();
  return (hi - lo) * std::max(1.0, hi / lo);
}

namespace {

struct Solved {
  CoefficientField field;
  CorrectorSolution sol;
};

Solved solve_state(const LatentState& z, const ResampleTriple& t, std::span<const double> initial = {}) {
  CoefficientField field = realize(z, t.config);
  CorrectorSolution sol = solve_corrector(field, t.beta, t.solve, initial);
  return {std::move(field), std::move(sol)};
}

/// Solves z warm-started from `base`; an unchanged field reuses base exactly so
/// that differences of identical problems are zero rather than solver noise.
Solved solve_near(const LatentState& z, const ResampleTriple& t, const Solved& base) {
  CoefficientField field = realize(z, t.config);
  if (field.values == base.field.values) return base;
  CorrectorSolution sol = solve_corrector(field, t.beta, t.solve, base.sol.phi);
  return {std::move(field), std::move(sol)};
}

Point3 lattice_point(const PeriodicGrid& g, std::size_t j) {
  const Index3 k = lattice_coords(g.dim(), g.period(), j);
  return {double(k[0]), double(k[1]), double(k[2])};
}

/// Ball energy of ∇w (no e_1 shift) with the face-to-cell reconstruction.
double gradient_energy_in_ball(std::span<const double> w, const PeriodicGrid& g, const Point3& p, double r) {
  const double h = g.spacing();
  double s = 0.0;
  for (std::size_t c : g.cells_within(p, r)) {
    for (int a = 0; a < g.dim(); ++a) {
      const double fwd = (w[g.neighbor(c, a, +1)] - w[c]) / h;
      const double back = (w[c] - w[g.neighbor(c, a, -1)]) / h;
      s += 0.5 * (fwd * fwd + back * back);
    }
  }
  return s * g.cell_volume();
}

}  // namespace

double delta_gamma_local(const CorrectorSolution& sol, const CoefficientField& field,
                         const CorrectorSolution& sol_j, const CoefficientField& field_j, std::size_t j,
                         double tau) {
  const PeriodicGrid& g = field.grid;
  const double h = g.spacing();
  double s = 0.0;
  // A face whose conductivity changed touches a cell within τ of j, so its
  // lower cell lies within τ + h.
  for (std::size_t c : g.cells_within(lattice_point(g, j), tau + h)) {
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t nb = g.neighbor(c, a, +1);
      const double dk = face_mean(field_j.values[c], field_j.values[nb]) - face_mean(field.values[c], field.values[nb]);
      if (dk == 0.0) continue;
      const double shift = a == 0 ? 1.0 : 0.0;
      const double grad = (sol.phi[nb] - sol.phi[c]) / h + shift;
      const double grad_j = (sol_j.phi[nb] - sol_j.phi[c]) / h + shift;
      s += grad_j * dk * grad;
    }
  }
  return s * g.cell_volume() / g.domain_volume();
}

double delta_j_gamma_direct(const ResampleTriple& t, std::size_t j) {
  const Solved base = solve_state(t.z, t);
  const Solved moved = solve_near(t.with_j(j), t, base);
  return moved.sol.gamma() - base.sol.gamma();
}

double delta_j_gamma_local(const ResampleTriple& t, std::size_t j) {
  const Solved base = solve_state(t.z, t);
  const Solved moved = solve_near(t.with_j(j), t, base);
  return delta_gamma_local(base.sol, base.field, moved.sol, moved.field, j, t.config.locality_radius());
}

DifferenceRecord delta_j_record(const ResampleTriple& t, std::size_t j) {
  const double tau = t.config.locality_radius();
  const Solved base = solve_state(t.z, t);
  const Solved moved = solve_near(t.with_j(j), t, base);
  DifferenceRecord r;
  r.j = j;
  r.gamma = base.sol.gamma();
  r.delta_gamma = moved.sol.gamma() - base.sol.gamma();
  r.delta_gamma_local = delta_gamma_local(base.sol, base.field, moved.sol, moved.field, j, tau);
  const double p0 = phi_energies(base.sol, j, tau).phi_hat;
  const double p1 = phi_energies(moved.sol, j, tau).phi_hat;
  r.phi_hat = {p0, p1};
  r.bound = single_site_constant(t.config) * (p0 * p0 + p1 * p1);
  return r;
}

DifferenceRecord delta_kj_gamma(const ResampleTriple& t, std::size_t k, std::size_t j) {
  const double tau = t.config.locality_radius();
  const Solved s0 = solve_state(t.z, t);
  const Solved sj = solve_near(t.with_j(j), t, s0);
  const Solved sk = solve_near(t.with_k(k), t, s0);
  const Solved sjk = solve_near(t.with_jk(j, k), t, s0);
  DifferenceRecord r;
  r.j = j;
  r.k = k;
  r.gamma = s0.sol.gamma();
  r.delta_gamma = sj.sol.gamma() - s0.sol.gamma();
  r.delta2_gamma = sjk.sol.gamma() - sk.sol.gamma() - sj.sol.gamma() + s0.sol.gamma();
  double sum_j = 0.0;
  for (std::size_t site : {j, k})
    for (const Solved* s : {&s0, &sj, &sk, &sjk}) {
      const double p = phi_energies(s->sol, site, tau).phi_hat;
      r.phi_hat.push_back(p);
      if (site == j) sum_j += p * p;
    }
  r.bound = single_site_constant(t.config) * sum_j;
  return r;
}

SecondDifferenceAudit second_difference_audit(const ResampleTriple& t, std::size_t k, std::size_t j) {
  const double tau = t.config.locality_radius();
  const PeriodicGrid g = t.config.grid();
  const Point3 pj = lattice_point(g, j);
  if (!(g.torus_distance(pj, lattice_point(g, k)) >= 2.0 * tau + g.spacing()))
    throw ConfigError("second-difference audit needs dist(k, j) >= 2 tau + h");
  const Solved s0 = solve_state(t.z, t);
  const Solved sj = solve_near(t.with_j(j), t, s0);
  const Solved sk = solve_near(t.with_k(k), t, s0);
  const Solved sjk = solve_near(t.with_jk(j, k), t, s0);
  const double d2 = sjk.sol.gamma() - sk.sol.gamma() - sj.sol.gamma() + s0.sol.gamma();
  const double scale = g.domain_volume();
  double energies = 0.0;
  for (const Solved* s : {&s0, &sj, &sk, &sjk}) {
    const double p = phi_energies(s->sol, j, tau).phi_hat;
    energies += p * p;
  }
  std::vector<double> wk(g.size()), wkj(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) {
    wk[c] = sk.sol.phi[c] - s0.sol.phi[c];
    wkj[c] = sjk.sol.phi[c] - sj.sol.phi[c];
  }
  const double grad = gradient_energy_in_ball(wk, g, pj, tau) + gradient_energy_in_ball(wkj, g, pj, tau);
  return {scale * scale * d2 * d2, energies * grad};
}

double second_difference_constant(const FieldConfig& config) {
  const auto [lo, hi] = config.bounds();
  return 2.0 * (hi - lo) * (hi - lo);
}

EfronSteinEstimate efron_stein_estimate(const FieldConfig& config, std::size_t n_replicas,
                                        const EfronSteinOptions& opt) {
  if (n_replicas < 2) throw ConfigError("Efron-Stein estimate needs at least 2 replicas");
  config.validate();
  const std::size_t n = config.site_count();
  struct Slot {
    bool ok = false;
    double gamma = 0.0;
    double half_sum = 0.0;
  };
  std::vector<Slot> slots(n_replicas);
  parallel_for(n_replicas, opt.workers, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(opt.seed, {r});
    const ResampleTriple t = ResampleTriple::sample(config, opt.beta, opt.solve, seed);
    try {
      const Solved base = solve_state(t.z, t);
      double sum = 0.0;
      if (opt.subsample_j) {
        Engine eng = derive_engine(seed, {3});
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, n - 1)(eng);
        const double d = solve_near(t.with_j(j), t, base).sol.gamma() - base.sol.gamma();
        sum = static_cast<double>(n) * d * d;
      } else {
        for (std::size_t j = 0; j < n; ++j) {
          const double d = solve_near(t.with_j(j), t, base).sol.gamma() - base.sol.gamma();
          sum += d * d;
        }
      }
      slots[r] = {true, base.sol.gamma(), 0.5 * sum};
    } catch (const SolveError&) {
      slots[r].ok = false;
    }
  });
  EfronSteinEstimate est;
  est.subsampled = opt.subsample_j;
  std::vector<double> bounds;
  for (const Slot& s : slots) {
    if (!s.ok) {
      ++est.failed;
      continue;
    }
    est.gammas.push_back(s.gamma);
    bounds.push_back(s.half_sum);
  }
  est.replicas = est.gammas.size();
  const SampleMoments mg = sample_moments(est.gammas), mb = sample_moments(bounds);
  est.var_hat = mg.variance;
  est.se_var = mg.se_variance;
  est.bound_hat = mb.mean;
  est.se_bound = mb.se_mean;
  return est;
}

std::vector<std::size_t> sample_subset_A(std::size_t n, std::size_t j, Engine& rng) {
  if (n < 1 || j >= n) throw ConfigError("subset sampler needs 0 <= j < n");
  const std::size_t s = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  std::vector<std::size_t> pool;
  pool.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    if (i != j) pool.push_back(i);
  std::vector<std::size_t> out;
  out.reserve(s);
  std::sample(pool.begin(), pool.end(), std::back_inserter(out), s, rng);
  return out;
}

double subset_weight(std::size_t n, std::size_t s) {
  // 1 / (n · C(n-1, s))
  double binom = 1.0;
  for (std::size_t i = 1; i <= s; ++i) binom = binom * static_cast<double>(n - 1 - s + i) / static_cast<double>(i);
  return 1.0 / (static_cast<double>(n) * binom);
}

IdentitySides chatterjee_identity_exact(std::span<const double> g, std::span<const double> f, std::size_t n,
                                        double q) {
  if (n < 1 || n > 4) throw ConfigError("exact enumeration supports 1 <= n <= 4");
  const std::size_t states = std::size_t{1} << n;
  if (g.size() != states || f.size() != states) throw ConfigError("g and f need 2^n values");
  std::vector<double> prob(states);
  for (std::size_t z = 0; z < states; ++z) {
    double p = 1.0;
    for (std::size_t i = 0; i < n; ++i) p *= (z >> i & 1U) ? q : 1.0 - q;
    prob[z] = p;
  }
  double eg = 0.0, ef = 0.0, egf = 0.0;
  for (std::size_t z = 0; z < states; ++z) {
    eg += prob[z] * g[z];
    ef += prob[z] * f[z];
    egf += prob[z] * g[z] * f[z];
  }
  IdentitySides out;
  out.lhs = egf - eg * ef;

  auto mix = [](std::size_t z, std::size_t zp, std::size_t set) { return (z & ~set) | (zp & set); };
  double rhs = 0.0;
  for (std::size_t z = 0; z < states; ++z)
    for (std::size_t zp = 0; zp < states; ++zp) {
      const double w = prob[z] * prob[zp];
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t bit = std::size_t{1} << j;
        const double dg = g[mix(z, zp, bit)] - g[z];
        for (std::size_t A = 0; A < states; ++A) {
          if (A & bit) continue;
          const double df = f[mix(z, zp, A | bit)] - f[mix(z, zp, A)];
          rhs += w * subset_weight(n, static_cast<std::size_t>(std::popcount(A))) * dg * df;
        }
      }
    }
  out.rhs = 0.5 * rhs;
  return out;
}

NormalBoundEstimate normal_bound_estimate(const FieldConfig& config, const NormalBoundParams& p) {
  config.validate();
  if (p.outer < p.min_outer) throw ConfigError("too few outer replicas for the normal-bound audit");
  if (p.inner < p.min_inner || p.inner < 2) throw ConfigError("too few inner draws for the normal-bound audit");
  if (p.sigma_replicas < 100) throw ConfigError("sigma ensemble needs at least 100 replicas");
  const std::size_t n = config.site_count();
  NormalBoundEstimate est;
  const ResampleTriple proto{{}, {}, {}, config, p.beta, p.solve};

  // Independent ensemble for the mean, σ² and the empirical distance.
  std::vector<double> gam(p.sigma_replicas, std::nan(""));
  parallel_for(p.sigma_replicas, p.workers, [&](std::size_t i) {
    try {
      gam[i] = solve_state(sample_latent(config, derive_seed(p.seed, {1, i})), proto).sol.gamma();
    } catch (const SolveError&) {
    }
  });
  std::erase_if(gam, [](double x) { return std::isnan(x); });
  est.failed += p.sigma_replicas - gam.size();
  const SampleMoments mg = sample_moments(gam);
  est.mean = mg.mean;
  est.sigma2 = mg.variance;
  if (!(est.sigma2 > 1e-14 * std::max(1.0, mg.mean * mg.mean)) || gam.size() < 100) {
    est.degenerate = true;
    est.sigma2 = 0.0;
    return est;
  }
  const double sigma = std::sqrt(est.sigma2);
  est.dW_empirical = wasserstein_to_normal(standardize(gam));
  {
    Engine eng = derive_engine(p.seed, {4});
    std::uniform_int_distribution<std::size_t> pick(0, gam.size() - 1);
    std::vector<double> boot(gam.size()), dws;
    for (std::size_t b = 0; b < p.bootstrap; ++b) {
      for (double& x : boot) x = gam[pick(eng)];
      dws.push_back(wasserstein_to_normal(standardize(boot)));
    }
    est.dW_se = std::sqrt(sample_moments(dws).variance);
  }

  struct Outer {
    bool ok = false;
    double cubes = 0.0;  // Σ_j |Δ_jΓ|³
    double inner_mean = 0.0, half1 = 0.0, half2 = 0.0;
  };
  std::vector<Outer> outer(p.outer);
  parallel_for(p.outer, p.workers, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(p.seed, {2, r});
    const ResampleTriple t = ResampleTriple::sample(config, p.beta, p.solve, seed);
    try {
      const Solved base = solve_state(t.z, t);
      const double g0 = base.sol.gamma();
      Outer o;
      if (p.subsample_j) {
        Engine eng = derive_engine(seed, {3});
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, n - 1)(eng);
        const double d = solve_near(t.with_j(j), t, base).sol.gamma() - g0;
        o.cubes = static_cast<double>(n) * std::abs(d * d * d);
      } else {
        for (std::size_t j = 0; j < n; ++j) {
          const double d = solve_near(t.with_j(j), t, base).sol.gamma() - g0;
          o.cubes += std::abs(d * d * d);
        }
      }
      // E[T | Z] by inner draws of (Z', j, A): T ≈ (n/2) Δ_jΓ(Z) Δ_jΓ(Z^A).
      std::vector<double> draws(p.inner);
      for (std::size_t i = 0; i < p.inner; ++i) {
        Engine eng = derive_engine(p.seed, {5, r, i});
        const LatentState zp = sample_latent(config, eng());
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, n - 1)(eng);
        const std::vector<std::size_t> A = sample_subset_A(n, j, eng);
        LatentState za = t.z;
        for (std::size_t a : A) za.sites[a] = zp.sites[a];
        LatentState zaj = za;
        zaj.sites[j] = zp.sites[j];
        const double gj = solve_near(replace_site(t.z, zp, j), t, base).sol.gamma();
        const double ga = A.empty() ? g0 : solve_near(za, t, base).sol.gamma();
        const double gaj = A.empty() ? gj : solve_near(zaj, t, base).sol.gamma();
        draws[i] = 0.5 * static_cast<double>(n) * (gj - g0) * (gaj - ga);
      }
      const std::size_t half = p.inner / 2;
      o.half1 = std::accumulate(draws.begin(), draws.begin() + half, 0.0) / static_cast<double>(half);
      o.half2 = std::accumulate(draws.begin() + half, draws.end(), 0.0) / static_cast<double>(p.inner - half);
      o.inner_mean = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(p.inner);
      o.ok = true;
      outer[r] = o;
    } catch (const SolveError&) {
    }
  });

  std::vector<double> cubes, means, h1, h2;
  for (const Outer& o : outer) {
    if (!o.ok) {
      ++est.failed;
      continue;
    }
    cubes.push_back(o.cubes);
    means.push_back(o.inner_mean);
    h1.push_back(o.half1);
    h2.push_back(o.half2);
  }
  const SampleMoments mc = sample_moments(cubes);
  est.term1 = mc.mean / (2.0 * sigma * sigma * sigma);
  // σ enters as σ^{-3}; its relative error is half that of σ².
  const double rel_sigma2 = mg.se_variance / mg.variance;
  const double rel_cubes = mc.mean > 0.0 ? mc.se_mean / mc.mean : 0.0;
  est.term1_se = est.term1 * std::hypot(rel_cubes, 1.5 * rel_sigma2);

  const SampleCovariance cov = sample_covariance(h1, h2);
  est.var_conditional_T = cov.value;
  est.var_conditional_T_se = cov.se;
  est.var_conditional_T_naive = sample_moments(means).variance;
  const double v = std::max(cov.value, 0.0);
  est.term2 = 2.0 / est.sigma2 * std::sqrt(v);
  const double se_sqrt_v = std::sqrt(v + cov.se) - std::sqrt(v);
  est.term2_se = 2.0 / est.sigma2 * std::hypot(se_sqrt_v, std::sqrt(v) * rel_sigma2);

  est.dW_bound = est.term1 + est.term2;
  est.combined_se = std::sqrt(est.term1_se * est.term1_se + est.term2_se * est.term2_se + est.dW_se * est.dW_se);
  return est;
}

}  // namespace rcflux

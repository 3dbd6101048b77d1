#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "rcflux/fields.hpp"
#include "rcflux/rng.hpp"
#include "rcflux/solver.hpp"

namespace rcflux {

/// Z and two independent copies Z' (resampling j) and Z'' (resampling k).
struct ResampleTriple {
  LatentState z, z_prime, z_dprime;
  FieldConfig config;
  double beta = 0.0;
  SolveConfig solve;

  /// Draws the three states from independent streams of `seed`.
  static ResampleTriple sample(const FieldConfig& config, double beta, const SolveConfig& solve, std::uint64_t seed);

  LatentState with_j(std::size_t j) const { return replace_site(z, z_prime, j); }
  LatentState with_k(std::size_t k) const { return replace_site(z, z_dprime, k); }
  /// (Z^k)^j: site k from Z'', then site j from Z'.
  LatentState with_jk(std::size_t j, std::size_t k) const { return replace_site(with_k(k), z_prime, j); }
};

struct DifferenceRecord {
  std::size_t j = 0;
  std::optional<std::size_t> k;
  double gamma = 0.0;  // Γ(Z)
  double delta_gamma = 0.0;
  std::optional<double> delta_gamma_local;
  std::optional<double> delta2_gamma;
  /// hatΦ_j over Z, Z^j (and Z^k, Z^{jk}), then hatΦ_k over the same states
  /// when k is present.
  std::vector<double> phi_hat;
  /// C (hatΦ_j(Z)² + hatΦ_j(Z^j)²) with C = (a^* - a_*) max(1, a^*/a_*).
  double bound = 0.0;
};

void to_json(nlohmann::json& j, const DifferenceRecord& r);

/// Explicit constant of the single-site bound L^d |Δ_jΓ| <= C (hatΦ_j(Z)² + hatΦ_j(Z^j)²).
double single_site_constant(const FieldConfig& config);

/// Γ(Z^j) - Γ(Z) from two full solves.
double delta_j_gamma_direct(const ResampleTriple& t, std::size_t j);

/// L^{-d} Σ_faces g^j_f (k^j_f - k_f) g_f h^d, summed over the faces near B_τ(j)
/// where the coefficient changed.
double delta_j_gamma_local(const ResampleTriple& t, std::size_t j);

/// Local quadrature for two already-solved states.
double delta_gamma_local(const CorrectorSolution& sol, const CoefficientField& field,
                         const CorrectorSolution& sol_j, const CoefficientField& field_j, std::size_t j, double tau);

/// Both forms of Δ_jΓ, the hatΦ energies and the single-site bound.
DifferenceRecord delta_j_record(const ResampleTriple& t, std::size_t j);

/// Δ_kΔ_jΓ = Γ(Z^{jk}) - Γ(Z^k) - Γ(Z^j) + Γ(Z) from four solves, with the
/// hatΦ_j and hatΦ_k energies of all four states.
DifferenceRecord delta_kj_gamma(const ResampleTriple& t, std::size_t k, std::size_t j);

/// Right-hand side of the far-separated second-difference bound (without its
/// constant): (Σ hatΦ_j² over Z, Z^j, Z^k, Z^{jk}) · ∫_{B_τ(j)} |∇Δ_kφ|² + |∇Δ_kφ^j|².
struct SecondDifferenceAudit {
  double lhs = 0.0;  // L^{2d} |Δ_kΔ_jΓ|²
  double rhs = 0.0;
};
SecondDifferenceAudit second_difference_audit(const ResampleTriple& t, std::size_t k, std::size_t j);

/// Constant of the second-difference bound, 2 (a^* - a_*)².
double second_difference_constant(const FieldConfig& config);

struct EfronSteinOptions {
  double beta = 0.0;
  SolveConfig solve;
  std::uint64_t seed = 0;
  bool subsample_j = false;  // one uniform j per replica, scaled by L^d
  int workers = 1;
};

struct EfronSteinEstimate {
  double var_hat = 0.0;
  double bound_hat = 0.0;
  double se_var = 0.0;
  double se_bound = 0.0;
  bool subsampled = false;
  std::size_t replicas = 0;
  std::size_t failed = 0;
  std::vector<double> gammas;
};

/// Sample variance of Γ against (1/2) Σ_j E|Δ_jΓ|².
EfronSteinEstimate efron_stein_estimate(const FieldConfig& config, std::size_t n_replicas,
                                        const EfronSteinOptions& opt);

/// Draws A ⊂ [n] \ {j} with probability K_{n,A} = |A|! (n-|A|-1)! / n!.
std::vector<std::size_t> sample_subset_A(std::size_t n, std::size_t j, Engine& rng);

/// K_{n,A} for |A| = s.
double subset_weight(std::size_t n, std::size_t s);

struct IdentitySides {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Both sides of Cov(g,f) = (1/2) Σ_j Σ_{A ∌ j} K_{n,A} E[Δ_j g(Z) Δ_j f(Z^A)]
/// by enumeration over (Z, Z') ∈ {0,1}^n × {0,1}^n with Z_i ~ Bernoulli(q).
/// g and f hold 2^n values indexed by bitmask (bit i is Z_i).
IdentitySides chatterjee_identity_exact(std::span<const double> g, std::span<const double> f, std::size_t n,
                                        double q);

struct NormalBoundParams {
  double beta = 0.0;
  SolveConfig solve;
  std::uint64_t seed = 0;
  std::size_t outer = 1000;
  std::size_t inner = 64;
  std::size_t sigma_replicas = 1000;
  std::size_t min_outer = 20;
  std::size_t min_inner = 4;
  bool subsample_j = false;
  std::size_t bootstrap = 200;
  int workers = 1;
};

struct NormalBoundEstimate {
  bool degenerate = false;
  double mean = 0.0;
  double sigma2 = 0.0;
  double term1 = 0.0, term1_se = 0.0;
  double term2 = 0.0, term2_se = 0.0;
  /// Var(E[T|Z]) from the debiased split-inner estimator and from the plain
  /// variance of inner means (biased upward by the inner noise).
  double var_conditional_T = 0.0, var_conditional_T_se = 0.0;
  double var_conditional_T_naive = 0.0;
  double dW_bound = 0.0;
  double dW_empirical = 0.0, dW_se = 0.0;
  double combined_se = 0.0;
  std::size_t failed = 0;
};

/// Monte Carlo audit of d_W((Γ-m)/σ, Y) <= (1/(2σ³)) Σ_j E|Δ_jΓ|³ + (2/σ²) Var(E[T|Z])^{1/2}.
NormalBoundEstimate normal_bound_estimate(const FieldConfig& config, const NormalBoundParams& params);

}  // namespace rcflux

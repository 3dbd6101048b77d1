#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rcflux/fields.hpp"
#include "rcflux/solver.hpp"

namespace rcflux {

enum class Campaign { scaling, normality, efron_stein, bound_audit, greens_decay, counterexample };

std::string to_string(Campaign c);
Campaign campaign_from_string(std::string_view name);

struct ExperimentSpec {
  FieldConfig model;
  /// (d, L) pairs; empty means the single pair (model.d, model.L).
  std::vector<std::pair<int, int>> dims_and_sizes;
  /// β values; absent means {0, 1/L²} for each L.
  std::optional<std::vector<double>> beta;
  std::size_t replicas = 1000;
  std::uint64_t master_seed = 0;
  std::vector<Campaign> campaigns;
  std::string output_dir = "out";
  int workers = 1;
  SolveConfig solve;
  std::size_t inner_samples = 64;
  std::size_t audit_records = 1000;  // DifferenceRecords written by bound_audit
  std::size_t greens_fields = 50;
  bool subsample_j = false;
  double cell_budget = 1e6;      // max L^d m^d per (d, L)
  double failure_budget = 0.01;  // max fraction of failed replicas

  void validate() const;
  std::vector<std::pair<int, int>> sizes() const;
  std::vector<double> betas_for(int L) const;
  FieldConfig config_for(int d, int L) const;
};

void to_json(nlohmann::json& j, const ExperimentSpec& s);
void from_json(const nlohmann::json& j, ExperimentSpec& s);

/// Sets the value at a dotted path ("model.L", "solve.rel_tolerance"),
/// creating objects on the way. The value is parsed as JSON when possible
/// and kept as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view dotted_path, std::string_view value);

/// FNV-1a of the canonical JSON dump.
std::uint64_t spec_hash(const ExperimentSpec& s);

struct ResultRow {
  std::string campaign;
  int d = 0;
  int L = 0;
  double beta = 0.0;
  std::string statistic;
  double value = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  /// One JSON object per line of records.jsonl.
  std::vector<nlohmann::json> records;
  /// Seeds of replicas dropped after a solver failure.
  std::vector<std::uint64_t> dropped_seeds;

  void add(Campaign c, int d, int L, double beta, std::string statistic, double value);
  /// First row matching all keys; throws std::out_of_range if none does.
  double value(std::string_view campaign, int d, int L, double beta, std::string_view statistic) const;
  void append(ExperimentResult&& other);
};

struct GammaEnsemble {
  std::vector<double> gammas;  // successful replicas in index order
  std::vector<std::uint64_t> failed_seeds;
  double mean_iterations = 0.0;
};

/// Γ over `n` replicas; replica i uses sample_latent(config, derive_seed(seed, {i})).
/// Throws CampaignError when failures exceed `failure_budget`.
GammaEnsemble gamma_ensemble(const FieldConfig& config, double beta, std::size_t n, std::uint64_t seed,
                             const SolveConfig& solve, int workers, double failure_budget = 0.01);

/// Seed of the (d, L) ensembles shared by all campaigns and β values.
std::uint64_t ensemble_seed(const ExperimentSpec& s, int d, int L);

struct SlopeFit {
  bool skipped = false;  // some variance is zero
  double slope = 0.0;
  double se = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // slope ± 1.96 se
};

/// Least-squares slope of log v against log x; se propagates se_v / v through
/// the regression weights.
SlopeFit fit_log_slope(std::span<const double> x, std::span<const double> v, std::span<const double> se_v);

ExperimentResult run_scaling(const ExperimentSpec& s);
ExperimentResult run_normality(const ExperimentSpec& s);
ExperimentResult run_efron_stein(const ExperimentSpec& s);
ExperimentResult run_bound_audit(const ExperimentSpec& s);
ExperimentResult run_greens_decay(const ExperimentSpec& s);
ExperimentResult run_counterexample(const ExperimentSpec& s);
ExperimentResult run_campaign(const ExperimentSpec& s, Campaign c);

/// Writes results.csv, manifest.json and (when there are records) records.jsonl.
void emit_plot_data(const ExperimentResult& result, const ExperimentSpec& spec, const std::filesystem::path& dir);

/// Tidy CSV text with header campaign,d,L,beta,statistic,value.
std::string results_csv(const ExperimentResult& result);

}  // namespace rcflux

#include "rcflux/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "rcflux/errors.hpp"
#include "rcflux/greens.hpp"
#include "rcflux/parallel.hpp"
#include "rcflux/resample.hpp"
#include "rcflux/rng.hpp"
#include "rcflux/stats.hpp"
#include "rcflux/stein.hpp"

namespace rcflux {

namespace {

constexpr const char* kCampaignNames[] = {"scaling",     "normality",    "efron_stein",
                                          "bound_audit", "greens_decay", "counterexample"};

// Sub-stream tags below ensemble_seed().
enum StreamTag : std::uint64_t {
  kGammaStream = 0,
  kEfronSteinStream = 1,
  kRecordStream = 2,
  kNormalBoundStream = 3,
  kGreensStream = 4,
  kBootstrapStream = 5,
  kControlStream = 6,
  kSecondDiffStream = 7,
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool is_variance_campaign(Campaign c) { return c != Campaign::greens_decay; }

/// Bootstrap standard error of the Wasserstein distance of the standardized sample.
double bootstrap_dw_se(std::span<const double> x, std::size_t rounds, Engine& eng) {
  if (rounds < 2) return 0.0;
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  std::vector<double> boot(x.size()), dws;
  dws.reserve(rounds);
  for (std::size_t b = 0; b < rounds; ++b) {
    for (double& v : boot) v = x[pick(eng)];
    dws.push_back(wasserstein_to_normal(standardize(boot)));
  }
  return std::sqrt(sample_moments(dws).variance);
}

void check_failures(std::size_t failed, std::size_t n, double budget, const char* what) {
  if (static_cast<double>(failed) > budget * static_cast<double>(n))
    throw CampaignError(std::string(what) + ": " + std::to_string(failed) + " of " + std::to_string(n) +
                        " replicas failed, above the failure budget");
}

}  // namespace

std::string to_string(Campaign c) { return kCampaignNames[static_cast<int>(c)]; }

Campaign campaign_from_string(std::string_view name) {
  std::string key(name);
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "greens") key = "greens_decay";
  for (int i = 0; i < 6; ++i)
    if (key == kCampaignNames[i]) return static_cast<Campaign>(i);
  throw ConfigError("unknown campaign '" + std::string(name) + "'");
}

std::vector<std::pair<int, int>> ExperimentSpec::sizes() const {
  if (dims_and_sizes.empty()) return {{model.d, model.L}};
  return dims_and_sizes;
}

std::vector<double> ExperimentSpec::betas_for(int L) const {
  if (beta) return *beta;
  return {0.0, 1.0 / (static_cast<double>(L) * L)};
}

FieldConfig ExperimentSpec::config_for(int d, int L) const {
  FieldConfig c = model;
  c.d = d;
  c.L = L;
  return c;
}

void ExperimentSpec::validate() const {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  solve.validate();
  if (!(failure_budget >= 0.0 && failure_budget < 1.0)) throw ConfigError("failure_budget must lie in [0, 1)");
  if (beta) {
    if (beta->empty()) throw ConfigError("beta list is empty");
    for (double b : *beta)
      if (!(b >= 0.0)) throw ConfigError("beta must be >= 0");
  }
  for (Campaign c : campaigns)
    if (is_variance_campaign(c) && replicas < 2)
      throw ConfigError(to_string(c) + " needs at least 2 replicas");
  for (auto [d, L] : sizes()) {
    const FieldConfig c = config_for(d, L);
    c.validate();
    const double cells = static_cast<double>(c.grid().size());
    if (cells > cell_budget)
      throw ConfigError("d=" + std::to_string(d) + " L=" + std::to_string(L) + " needs " + fmt(cells) +
                        " cells, above the budget of " + fmt(cell_budget));
  }
}

void to_json(nlohmann::json& j, const ExperimentSpec& s) {
  nlohmann::json sizes = nlohmann::json::array();
  for (auto [d, L] : s.dims_and_sizes) sizes.push_back({d, L});
  nlohmann::json campaigns = nlohmann::json::array();
  for (Campaign c : s.campaigns) campaigns.push_back(to_string(c));
  j = nlohmann::json{{"model", s.model},
                     {"dims_and_sizes", sizes},
                     {"replicas", s.replicas},
                     {"master_seed", s.master_seed},
                     {"campaigns", campaigns},
                     {"output_dir", s.output_dir},
                     {"workers", s.workers},
                     {"solve", s.solve},
                     {"inner_samples", s.inner_samples},
                     {"audit_records", s.audit_records},
                     {"greens_fields", s.greens_fields},
                     {"subsample_j", s.subsample_j},
                     {"cell_budget", s.cell_budget},
                     {"failure_budget", s.failure_budget}};
  if (s.beta) j["beta"] = *s.beta;
}

void from_json(const nlohmann::json& j, ExperimentSpec& s) {
  static const std::set<std::string> known{
      "model",         "dims_and_sizes", "beta",          "replicas",    "master_seed",
      "campaigns",     "output_dir",     "workers",       "solve",       "inner_samples",
      "audit_records", "greens_fields",  "subsample_j",   "cell_budget", "failure_budget"};
  if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown spec key '" + key + "'");
  const ExperimentSpec def;
  s = def;
  if (j.contains("model")) j.at("model").get_to(s.model);
  if (j.contains("dims_and_sizes"))
    for (const auto& e : j.at("dims_and_sizes")) {
      if (e.is_array() && e.size() == 2)
        s.dims_and_sizes.emplace_back(e[0].get<int>(), e[1].get<int>());
      else
        s.dims_and_sizes.emplace_back(e.at("d").get<int>(), e.at("L").get<int>());
    }
  if (j.contains("beta")) {
    const auto& b = j.at("beta");
    s.beta = b.is_array() ? b.get<std::vector<double>>() : std::vector<double>{b.get<double>()};
  }
  s.replicas = j.value("replicas", def.replicas);
  s.master_seed = j.value("master_seed", def.master_seed);
  if (j.contains("campaigns"))
    for (const auto& c : j.at("campaigns")) s.campaigns.push_back(campaign_from_string(c.get<std::string>()));
  s.output_dir = j.value("output_dir", def.output_dir);
  s.workers = j.value("workers", def.workers);
  if (j.contains("solve")) j.at("solve").get_to(s.solve);
  s.inner_samples = j.value("inner_samples", def.inner_samples);
  s.audit_records = j.value("audit_records", def.audit_records);
  s.greens_fields = j.value("greens_fields", def.greens_fields);
  s.subsample_j = j.value("subsample_j", def.subsample_j);
  s.cell_budget = j.value("cell_budget", def.cell_budget);
  s.failure_budget = j.value("failure_budget", def.failure_budget);
}

void apply_override(nlohmann::json& doc, std::string_view dotted_path, std::string_view value) {
  if (dotted_path.empty()) throw ConfigError("empty override path");
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string key(dotted_path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (key.empty()) throw ConfigError("malformed override path '" + std::string(dotted_path) + "'");
    if (!node->is_object()) *node = nlohmann::json::object();
    node = &(*node)[key];
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
  *node = parsed.is_discarded() ? nlohmann::json(std::string(value)) : parsed;
}

std::uint64_t spec_hash(const ExperimentSpec& s) {
  const std::string text = nlohmann::json(s).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void ExperimentResult::add(Campaign c, int d, int L, double beta, std::string statistic, double value) {
  rows.push_back({to_string(c), d, L, beta, std::move(statistic), value});
}

double ExperimentResult::value(std::string_view campaign, int d, int L, double beta,
                               std::string_view statistic) const {
  for (const ResultRow& r : rows)
    if (r.campaign == campaign && r.d == d && r.L == L && r.statistic == statistic &&
        (r.beta == beta || (std::isnan(r.beta) && std::isnan(beta))))
      return r.value;
  throw std::out_of_range("no row " + std::string(campaign) + "/" + std::string(statistic));
}

void ExperimentResult::append(ExperimentResult&& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  records.insert(records.end(), other.records.begin(), other.records.end());
  dropped_seeds.insert(dropped_seeds.end(), other.dropped_seeds.begin(), other.dropped_seeds.end());
}

std::uint64_t ensemble_seed(const ExperimentSpec& s, int d, int L) {
  return derive_seed(s.master_seed, {static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(L)});
}

GammaEnsemble gamma_ensemble(const FieldConfig& config, double beta, std::size_t n, std::uint64_t seed,
                             const SolveConfig& solve, int workers, double failure_budget) {
  struct Slot {
    bool ok = false;
    double gamma = 0.0;
    int iterations = 0;
  };
  std::vector<Slot> slots(n);
  parallel_for(n, workers, [&](std::size_t i) {
    try {
      const CorrectorSolution sol =
          solve_corrector(realize(sample_latent(config, derive_seed(seed, {i})), config), beta, solve);
      slots[i] = {true, sol.gamma(), sol.iterations};
    } catch (const SolveError&) {
    }
  });
  GammaEnsemble out;
  double iters = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!slots[i].ok) {
      out.failed_seeds.push_back(derive_seed(seed, {i}));
      continue;
    }
    out.gammas.push_back(slots[i].gamma);
    iters += slots[i].iterations;
  }
  if (!out.gammas.empty()) out.mean_iterations = iters / static_cast<double>(out.gammas.size());
  check_failures(out.failed_seeds.size(), n, failure_budget, "gamma ensemble");
  return out;
}

SlopeFit fit_log_slope(std::span<const double> x, std::span<const double> v, std::span<const double> se_v) {
  if (x.size() != v.size() || x.size() != se_v.size() || x.size() < 2)
    throw ConfigError("slope fit needs at least two matching points");
  SlopeFit fit;
  for (double vi : v)
    if (!(vi > 0.0)) {
      fit.skipped = true;
      return fit;
    }
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(v[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * ly[i];
  }
  if (!(sxx > 0.0)) throw ConfigError("slope fit needs distinct x values");
  fit.slope = sxy / sxx;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (lx[i] - mx) / sxx;
    const double rel = se_v[i] / v[i];
    var += w * w * rel * rel;
  }
  fit.se = std::sqrt(var);
  fit.ci_lo = fit.slope - 1.96 * fit.se;
  fit.ci_hi = fit.slope + 1.96 * fit.se;
  return fit;
}

namespace {

/// β column of a fit row: the slot's β when it does not depend on L, NaN for
/// the default 1/L² slot.
double slot_beta(const ExperimentSpec& s, std::size_t slot) {
  if (s.beta) return (*s.beta)[slot];
  return slot == 0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
}

void add_fit(ExperimentResult& r, Campaign c, int d, double beta, const std::string& prefix, const SlopeFit& f) {
  r.add(c, d, 0, beta, prefix + "fit_skipped", f.skipped ? 1.0 : 0.0);
  if (f.skipped) return;
  r.add(c, d, 0, beta, prefix + "slope", f.slope);
  r.add(c, d, 0, beta, prefix + "slope_se", f.se);
  r.add(c, d, 0, beta, prefix + "slope_ci_lo", f.ci_lo);
  r.add(c, d, 0, beta, prefix + "slope_ci_hi", f.ci_hi);
}

std::map<int, std::vector<int>> sizes_by_dim(const ExperimentSpec& s) {
  std::map<int, std::vector<int>> out;
  for (auto [d, L] : s.sizes()) out[d].push_back(L);
  for (auto& [d, Ls] : out) {
    std::sort(Ls.begin(), Ls.end());
    Ls.erase(std::unique(Ls.begin(), Ls.end()), Ls.end());
  }
  return out;
}

/// 1/Γ for each replica of the shared ensemble.
std::vector<double> inverses(std::span<const double> g) {
  std::vector<double> out(g.size());
  std::transform(g.begin(), g.end(), out.begin(), [](double x) { return 1.0 / x; });
  return out;
}

}  // namespace

ExperimentResult run_scaling(const ExperimentSpec& s) {
  s.validate();
  ExperimentResult res;
  const Campaign c = Campaign::scaling;
  const bool series_dependent = s.model.model == Model::series_resistor && s.model.series.dependent;
  for (const auto& [d, Ls] : sizes_by_dim(s)) {
    if (Ls.size() < 3) throw ConfigError("scaling needs at least three values of L for d=" + std::to_string(d));
    const std::size_t slots = s.betas_for(Ls.front()).size();
    for (std::size_t slot = 0; slot < slots; ++slot) {
      std::vector<double> xs, vars, ses, ivars, ises;
      for (int L : Ls) {
        const double beta = s.betas_for(L)[slot];
        const FieldConfig cfg = s.config_for(d, L);
        const GammaEnsemble e = gamma_ensemble(cfg, beta, s.replicas, derive_seed(ensemble_seed(s, d, L), {kGammaStream}),
                                               s.solve, s.workers, s.failure_budget);
        res.dropped_seeds.insert(res.dropped_seeds.end(), e.failed_seeds.begin(), e.failed_seeds.end());
        const SampleMoments m = sample_moments(e.gammas);
        res.add(c, d, L, beta, "replicas", static_cast<double>(e.gammas.size()));
        res.add(c, d, L, beta, "failed", static_cast<double>(e.failed_seeds.size()));
        res.add(c, d, L, beta, "mean_gamma", m.mean);
        res.add(c, d, L, beta, "mean_gamma_se", m.se_mean);
        res.add(c, d, L, beta, "var_gamma", m.variance);
        res.add(c, d, L, beta, "var_gamma_se", m.se_variance);
        res.add(c, d, L, beta, "mean_cg_iterations", e.mean_iterations);
        xs.push_back(L);
        vars.push_back(m.variance);
        ses.push_back(m.se_variance);
        if (series_dependent) {
          const SampleMoments mi = sample_moments(inverses(e.gammas));
          const double p = s.model.series.p;
          res.add(c, d, L, beta, "var_inv_gamma", mi.variance);
          res.add(c, d, L, beta, "var_inv_gamma_se", mi.se_variance);
          res.add(c, d, L, beta, "var_inv_gamma_exact", 2.0 * p * (1.0 - p) / (static_cast<double>(L) * L));
          ivars.push_back(mi.variance);
          ises.push_back(mi.se_variance);
        }
      }
      add_fit(res, c, d, slot_beta(s, slot), "", fit_log_slope(xs, vars, ses));
      if (series_dependent) add_fit(res, c, d, slot_beta(s, slot), "inv_gamma_", fit_log_slope(xs, ivars, ises));
    }
  }
  return res;
}

ExperimentResult run_normality(const ExperimentSpec& s) {
  s.validate();
  ExperimentResult res;
  const Campaign c = Campaign::normality;
  for (auto [d, L] : s.sizes()) {
    const FieldConfig cfg = s.config_for(d, L);
    const std::uint64_t es = ensemble_seed(s, d, L);
    const std::vector<double> betas = s.betas_for(L);
    for (std::size_t bi = 0; bi < betas.size(); ++bi) {
      const double beta = betas[bi];
      const GammaEnsemble e =
          gamma_ensemble(cfg, beta, s.replicas, derive_seed(es, {kGammaStream}), s.solve, s.workers, s.failure_budget);
      res.dropped_seeds.insert(res.dropped_seeds.end(), e.failed_seeds.begin(), e.failed_seeds.end());
      const SampleMoments m = sample_moments(e.gammas);
      res.add(c, d, L, beta, "replicas", static_cast<double>(e.gammas.size()));
      res.add(c, d, L, beta, "mean_gamma", m.mean);
      res.add(c, d, L, beta, "var_gamma", m.variance);
      const bool degenerate = !(m.variance > 1e-14 * std::max(1.0, m.mean * m.mean));
      res.add(c, d, L, beta, "degenerate", degenerate ? 1.0 : 0.0);
      if (degenerate) continue;
      res.add(c, d, L, beta, "dW", wasserstein_to_normal(standardize(e.gammas)));
      Engine boot = derive_engine(es, {kBootstrapStream, bi});
      res.add(c, d, L, beta, "dW_se", bootstrap_dw_se(e.gammas, 200, boot));
    }
    // The same pipeline applied to exact normal draws: the finite-sample floor.
    Engine ctl = derive_engine(es, {kControlStream});
    std::normal_distribution<double> normal;
    std::vector<double> control(s.replicas);
    for (double& x : control) x = normal(ctl);
    res.add(c, d, L, 0.0, "dW_normal_control", wasserstein_to_normal(standardize(control)));
  }
  return res;
}

ExperimentResult run_efron_stein(const ExperimentSpec& s) {
  s.validate();
  ExperimentResult res;
  const Campaign c = Campaign::efron_stein;
  for (auto [d, L] : s.sizes()) {
    const FieldConfig cfg = s.config_for(d, L);
    for (double beta : s.betas_for(L)) {
      EfronSteinOptions opt;
      opt.beta = beta;
      opt.solve = s.solve;
      opt.seed = derive_seed(ensemble_seed(s, d, L), {kEfronSteinStream});
      opt.subsample_j = s.subsample_j;
      opt.workers = s.workers;
      const EfronSteinEstimate e = efron_stein_estimate(cfg, s.replicas, opt);
      check_failures(e.failed, s.replicas, s.failure_budget, "efron_stein");
      const double se = std::hypot(e.se_var, e.se_bound);
      res.add(c, d, L, beta, "replicas", static_cast<double>(e.replicas));
      res.add(c, d, L, beta, "failed", static_cast<double>(e.failed));
      res.add(c, d, L, beta, "subsampled", e.subsampled ? 1.0 : 0.0);
      res.add(c, d, L, beta, "var_hat", e.var_hat);
      res.add(c, d, L, beta, "var_hat_se", e.se_var);
      res.add(c, d, L, beta, "bound_hat", e.bound_hat);
      res.add(c, d, L, beta, "bound_hat_se", e.se_bound);
      res.add(c, d, L, beta, "combined_se", se);
      res.add(c, d, L, beta, "holds_3se", e.var_hat <= e.bound_hat + 3.0 * se ? 1.0 : 0.0);
    }
  }
  return res;
}

ExperimentResult run_bound_audit(const ExperimentSpec& s) {
  s.validate();
  ExperimentResult res;
  const Campaign c = Campaign::bound_audit;
  for (auto [d, L] : s.sizes()) {
    const FieldConfig cfg = s.config_for(d, L);
    const std::uint64_t es = ensemble_seed(s, d, L);
    const std::size_t n = cfg.site_count();
    const double scale = std::pow(static_cast<double>(L), d);
    const PeriodicGrid grid = cfg.grid();
    for (double beta : s.betas_for(L)) {
      // Single-site records.
      std::vector<std::optional<DifferenceRecord>> recs(s.audit_records);
      parallel_for(s.audit_records, s.workers, [&](std::size_t r) {
        const std::uint64_t seed = derive_seed(es, {kRecordStream, r});
        Engine eng = derive_engine(seed, {0});
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, n - 1)(eng);
        try {
          recs[r] = delta_j_record(ResampleTriple::sample(cfg, beta, s.solve, derive_seed(seed, {1})), j);
        } catch (const SolveError&) {
        }
      });
      std::size_t failed = 0, violations = 0;
      double max_ratio = 0.0, max_identity = 0.0;
      for (std::size_t r = 0; r < recs.size(); ++r) {
        if (!recs[r]) {
          ++failed;
          res.dropped_seeds.push_back(derive_seed(es, {kRecordStream, r}));
          continue;
        }
        const DifferenceRecord& rec = *recs[r];
        const double lhs = scale * std::abs(rec.delta_gamma);
        const bool violated = lhs > rec.bound;
        violations += violated;
        if (rec.bound > 0.0) max_ratio = std::max(max_ratio, lhs / rec.bound);
        const double id_err = std::abs(*rec.delta_gamma_local - rec.delta_gamma) / std::abs(rec.gamma);
        max_identity = std::max(max_identity, id_err);
        nlohmann::json j = rec;
        j["type"] = "delta_j";
        j["d"] = d;
        j["L"] = L;
        j["beta"] = beta;
        j["lhs"] = lhs;
        j["violation"] = violated;
        res.records.push_back(std::move(j));
      }
      check_failures(failed, s.audit_records, s.failure_budget, "bound_audit records");
      res.add(c, d, L, beta, "records", static_cast<double>(s.audit_records - failed));
      res.add(c, d, L, beta, "single_site_constant", single_site_constant(cfg));
      res.add(c, d, L, beta, "single_site_violations", static_cast<double>(violations));
      res.add(c, d, L, beta, "single_site_max_ratio", max_ratio);
      res.add(c, d, L, beta, "identity_max_rel_err", max_identity);

      // Far-separated second differences, when the torus has room for them.
      const double tau = cfg.locality_radius();
      std::vector<std::size_t> far;  // offsets from site 0
      for (std::size_t k = 0; k < n; ++k) {
        const Index3 kc = lattice_coords(d, L, k);
        const Index3 jc = lattice_coords(d, L, 0);
        const Point3 pk{double(kc[0]), double(kc[1]), double(kc[2])}, pj{double(jc[0]), double(jc[1]), double(jc[2])};
        if (grid.torus_distance(pk, pj) >= 2.0 * tau + grid.spacing()) far.push_back(k);
      }
      const std::size_t pairs = far.empty() ? 0 : std::max<std::size_t>(1, s.audit_records / 10);
      std::vector<std::optional<SecondDifferenceAudit>> audits(pairs);
      parallel_for(pairs, s.workers, [&](std::size_t r) {
        const std::uint64_t seed = derive_seed(es, {kSecondDiffStream, r});
        Engine eng = derive_engine(seed, {0});
        const std::size_t k = far[std::uniform_int_distribution<std::size_t>(0, far.size() - 1)(eng)];
        // Translate the pair by a uniform site so that every j is exercised.
        const std::size_t shift = std::uniform_int_distribution<std::size_t>(0, n - 1)(eng);
        const Index3 sc = lattice_coords(d, L, shift), kc = lattice_coords(d, L, k);
        Index3 kk{};
        for (int a = 0; a < d; ++a) kk[a] = (kc[a] + sc[a]) % L;
        try {
          audits[r] = second_difference_audit(ResampleTriple::sample(cfg, beta, s.solve, derive_seed(seed, {1})),
                                              lattice_flat(d, L, kk), shift);
        } catch (const SolveError&) {
        }
      });
      const double c2 = second_difference_constant(cfg);
      std::size_t v2 = 0, done2 = 0;
      double max_ratio2 = 0.0;
      for (const auto& a : audits) {
        if (!a) continue;
        ++done2;
        const double rhs = c2 * a->rhs;
        v2 += a->lhs > rhs;
        if (rhs > 0.0) max_ratio2 = std::max(max_ratio2, a->lhs / rhs);
      }
      res.add(c, d, L, beta, "second_diff_pairs", static_cast<double>(done2));
      res.add(c, d, L, beta, "second_diff_violations", static_cast<double>(v2));
      res.add(c, d, L, beta, "second_diff_max_ratio", max_ratio2);

      // The normal-approximation bound.
      NormalBoundParams p;
      p.beta = beta;
      p.solve = s.solve;
      p.seed = derive_seed(es, {kNormalBoundStream});
      p.outer = s.replicas;
      p.inner = s.inner_samples;
      p.sigma_replicas = s.replicas;
      p.subsample_j = s.subsample_j;
      p.workers = s.workers;
      const NormalBoundEstimate nb = normal_bound_estimate(cfg, p);
      check_failures(nb.failed, 2 * s.replicas, s.failure_budget, "bound_audit normal bound");
      res.add(c, d, L, beta, "degenerate", nb.degenerate ? 1.0 : 0.0);
      if (nb.degenerate) continue;
      res.add(c, d, L, beta, "sigma2", nb.sigma2);
      res.add(c, d, L, beta, "term1", nb.term1);
      res.add(c, d, L, beta, "term1_se", nb.term1_se);
      res.add(c, d, L, beta, "term2", nb.term2);
      res.add(c, d, L, beta, "term2_se", nb.term2_se);
      res.add(c, d, L, beta, "var_conditional_T", nb.var_conditional_T);
      res.add(c, d, L, beta, "var_conditional_T_se", nb.var_conditional_T_se);
      res.add(c, d, L, beta, "var_conditional_T_naive", nb.var_conditional_T_naive);
      res.add(c, d, L, beta, "dW_bound", nb.dW_bound);
      res.add(c, d, L, beta, "dW_empirical", nb.dW_empirical);
      res.add(c, d, L, beta, "dW_se", nb.dW_se);
      res.add(c, d, L, beta, "combined_se", nb.combined_se);
      res.add(c, d, L, beta, "holds_3se", nb.dW_empirical <= nb.dW_bound + 3.0 * nb.combined_se ? 1.0 : 0.0);
    }
  }
  return res;
}

ExperimentResult run_greens_decay(const ExperimentSpec& s) {
  s.validate();
  ExperimentResult res;
  const Campaign c = Campaign::greens_decay;
  for (auto [d, L] : s.sizes()) {
    if (d != 2 && d != 3) throw ConfigError("greens_decay supports d = 2 and d = 3");
    const FieldConfig cfg = s.config_for(d, L);
    const PeriodicGrid grid = cfg.grid();
    const std::uint64_t es = ensemble_seed(s, d, L);
    for (double beta : s.betas_for(L)) {
      if (d == 3) {
        std::vector<std::vector<DecayBin>> profiles(s.greens_fields);
        parallel_for(s.greens_fields, s.workers, [&](std::size_t f) {
          const CoefficientField field = realize(sample_latent(cfg, derive_seed(es, {kGreensStream, f})), cfg);
          profiles[f] = decay_profile_3d(solve_green(field, beta, 0, s.solve));
        });
        std::vector<DecayBin> worst = profiles.front();
        for (const auto& p : profiles)
          for (std::size_t b = 0; b < p.size(); ++b) worst[b].max_scaled = std::max(worst[b].max_scaled, p[b].max_scaled);
        bool monotone = true, monotone_inner = true;
        for (std::size_t b = 1; b + 1 < worst.size(); ++b) {
          const bool ok = worst[b + 1].max_scaled <= 1.1 * worst[b].max_scaled;
          monotone = monotone && ok;
          if (worst[b + 1].hi <= 0.5 * L) monotone_inner = monotone_inner && ok;
        }
        for (std::size_t b = 0; b < worst.size(); ++b) {
          const std::string tag = "bin" + std::to_string(b) + "_";
          res.add(c, d, L, beta, tag + "lo", worst[b].lo);
          res.add(c, d, L, beta, tag + "hi", worst[b].hi);
          res.add(c, d, L, beta, tag + "max_scaled_G", worst[b].max_scaled);
          nlohmann::json j{{"type", "decay_bin"}, {"d", d},   {"L", L},
                           {"beta", beta},        {"bin_lo", worst[b].lo}, {"bin_hi", worst[b].hi},
                           {"max_scaled_G", worst[b].max_scaled}, {"n_cells", worst[b].n_cells}};
          res.records.push_back(std::move(j));
        }
        res.add(c, d, L, beta, "fields", static_cast<double>(s.greens_fields));
        res.add(c, d, L, beta, "nonincreasing_10pct", monotone ? 1.0 : 0.0);
        res.add(c, d, L, beta, "nonincreasing_10pct_inscribed", monotone_inner ? 1.0 : 0.0);
      } else {
        // Source at the centre of the period cell, balls around the corner cell.
        Index3 yc{};
        for (int a = 0; a < 2; ++a) yc[a] = grid.cells_per_axis() / 2;
        const std::size_t y = grid.flat(yc);
        const double dist = grid.torus_distance(grid.center(0), grid.center(y));
        std::vector<double> radii;
        for (double R = 0.5; 2.0 * R < dist; R *= 2.0) radii.push_back(R);
        std::vector<std::vector<double>> energies(s.greens_fields);
        parallel_for(s.greens_fields, s.workers, [&](std::size_t f) {
          const CoefficientField field = realize(sample_latent(cfg, derive_seed(es, {kGreensStream, f})), cfg);
          const GreenFunction g = solve_green(field, beta, y, s.solve);
          for (double R : radii) energies[f].push_back(annulus_gradient_energy_2d(g, 0, R));
        });
        double overall = 0.0;
        for (std::size_t i = 0; i < radii.size(); ++i) {
          double mx = 0.0;
          for (const auto& e : energies) mx = std::max(mx, e[i]);
          overall = std::max(overall, mx);
          res.add(c, d, L, beta, "R" + fmt(radii[i]) + "_max_energy", mx);
        }
        res.add(c, d, L, beta, "fields", static_cast<double>(s.greens_fields));
        res.add(c, d, L, beta, "max_ball_energy", overall);
      }
    }
  }
  return res;
}

ExperimentResult run_counterexample(const ExperimentSpec& s) {
  s.validate();
  if (s.model.model != Model::series_resistor || !s.model.series.dependent)
    throw ConfigError("counterexample needs the dependent series model");
  ExperimentResult res;
  const Campaign c = Campaign::counterexample;
  const double p = s.model.series.p;
  // 1/Γ - 2 = (Z_{L+1} - Z_1)/L; the difference takes -1, 0, 1.
  const double q = p * (1.0 - p);
  const double sd = std::sqrt(2.0 * q);
  for (auto [d, L] : s.sizes()) {
    if (d != 1) throw ConfigError("counterexample needs d = 1");
    const FieldConfig cfg = s.config_for(d, L);
    const std::uint64_t seed = derive_seed(ensemble_seed(s, d, L), {kGammaStream});
    struct Slot {
      bool ok = false;
      double gamma = 0.0, closed_form_err = 0.0;
    };
    std::vector<Slot> slots(s.replicas);
    parallel_for(s.replicas, s.workers, [&](std::size_t i) {
      const LatentState z = sample_latent(cfg, derive_seed(seed, {i}));
      try {
        const double g = solve_corrector(realize(z, cfg), 0.0, s.solve).gamma();
        const double expected = 2.0 + (z.chain_end->value - z.sites.front().value) / L;
        slots[i] = {true, g, std::abs(1.0 / g - expected)};
      } catch (const SolveError&) {
      }
    });
    std::vector<double> gam;
    double max_err = 0.0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (!slots[i].ok) {
        res.dropped_seeds.push_back(derive_seed(seed, {i}));
        continue;
      }
      gam.push_back(slots[i].gamma);
      max_err = std::max(max_err, slots[i].closed_form_err);
    }
    check_failures(s.replicas - gam.size(), s.replicas, s.failure_budget, "counterexample");
    const SampleMoments m = sample_moments(gam), mi = sample_moments(inverses(gam));
    const double exact = 2.0 * q / (static_cast<double>(L) * L);
    res.add(c, d, L, 0.0, "replicas", static_cast<double>(gam.size()));
    res.add(c, d, L, 0.0, "mean_gamma", m.mean);
    res.add(c, d, L, 0.0, "var_gamma", m.variance);
    res.add(c, d, L, 0.0, "var_inv_gamma", mi.variance);
    res.add(c, d, L, 0.0, "var_inv_gamma_se", mi.se_variance);
    res.add(c, d, L, 0.0, "var_inv_gamma_exact", exact);
    res.add(c, d, L, 0.0, "closed_form_max_err", max_err);
    const bool degenerate = !(q > 0.0) || !(m.variance > 0.0);
    res.add(c, d, L, 0.0, "degenerate", degenerate ? 1.0 : 0.0);
    if (degenerate) continue;
    res.add(c, d, L, 0.0, "dW", wasserstein_to_normal(standardize(gam)));
    Engine boot = derive_engine(ensemble_seed(s, d, L), {kBootstrapStream});
    res.add(c, d, L, 0.0, "dW_se", bootstrap_dw_se(gam, 200, boot));
    // Exact distance of the standardized three-point law of Z_{L+1} - Z_1.
    const std::vector<double> atoms{-1.0 / sd, 0.0, 1.0 / sd}, weights{q, 1.0 - 2.0 * q, q};
    res.add(c, d, L, 0.0, "dW_limit", wasserstein_discrete_to_normal(atoms, weights));
  }
  return res;
}

ExperimentResult run_campaign(const ExperimentSpec& s, Campaign c) {
  switch (c) {
    case Campaign::scaling:
      return run_scaling(s);
    case Campaign::normality:
      return run_normality(s);
    case Campaign::efron_stein:
      return run_efron_stein(s);
    case Campaign::bound_audit:
      return run_bound_audit(s);
    case Campaign::greens_decay:
      return run_greens_decay(s);
    case Campaign::counterexample:
      return run_counterexample(s);
  }
  throw ConfigError("unknown campaign");
}

std::string results_csv(const ExperimentResult& result) {
  std::string out = "campaign,d,L,beta,statistic,value\n";
  for (const ResultRow& r : result.rows) {
    out += r.campaign + "," + std::to_string(r.d) + "," + std::to_string(r.L) + "," + fmt(r.beta) + "," + r.statistic +
           "," + fmt(r.value) + "\n";
  }
  return out;
}

void emit_plot_data(const ExperimentResult& result, const ExperimentSpec& spec, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CampaignError("cannot create output directory " + dir.string() + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw CampaignError("cannot write " + (dir / name).string());
    out << text;
    if (!out) throw CampaignError("write failed for " + (dir / name).string());
  };
  write("results.csv", results_csv(result));

  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(spec_hash(spec)));
  nlohmann::json seeds = nlohmann::json::array();
  for (auto [d, L] : spec.sizes()) seeds.push_back({{"d", d}, {"L", L}, {"ensemble_seed", ensemble_seed(spec, d, L)}});
  nlohmann::json manifest{{"spec", spec},
                          {"spec_hash", hash},
                          {"master_seed", spec.master_seed},
                          {"ensemble_seeds", seeds},
                          {"dropped_seeds", result.dropped_seeds},
                          {"rows", result.rows.size()},
                          {"versions", {{"rcflux", "0.1.0"}, {"compiler", __VERSION__}, {"cxx", __cplusplus}}}};
  write("manifest.json", manifest.dump(2) + "\n");

  if (!result.records.empty()) {
    std::string lines;
    for (const auto& r : result.records) lines += r.dump() + "\n";
    write("records.jsonl", lines);
  }
}

}  // namespace rcflux

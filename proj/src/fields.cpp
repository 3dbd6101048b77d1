#include "rcflux/fields.hpp"

#include <cmath>
#include <random>
#include <string>

#include "rcflux/errors.hpp"
#include "rcflux/rng.hpp"

namespace rcflux {

NLOHMANN_JSON_SERIALIZE_ENUM(Model, {{Model::checkerboard, "checkerboard"},
                                     {Model::poisson_pores, "poisson_pores"},
                                     {Model::series_resistor, "series_resistor"}})
NLOHMANN_JSON_SERIALIZE_ENUM(CheckerboardLaw, {{CheckerboardLaw::two_point, "two_point"},
                                               {CheckerboardLaw::uniform, "uniform"}})
NLOHMANN_JSON_SERIALIZE_ENUM(RadiusLaw, {{RadiusLaw::fixed, "fixed"}, {RadiusLaw::uniform, "uniform"}})

void FieldConfig::validate() const {
  if (d < 1 || d > 3) throw ConfigError("d must be 1, 2 or 3");
  if (L < 1) throw ConfigError("L must be >= 1");
  if (m < 1) throw ConfigError("m must be >= 1");
  if (!(a_lo > 0.0)) throw ConfigError("a_lo must be > 0");
  if (!(a_lo <= a_hi)) throw ConfigError("a_lo must not exceed a_hi");
  switch (model) {
    case Model::checkerboard:
      if (checkerboard.law == CheckerboardLaw::two_point && !(checkerboard.p >= 0.0 && checkerboard.p <= 1.0))
        throw ConfigError("checkerboard p must lie in [0,1]");
      break;
    case Model::poisson_pores:
      if (!(poisson.mu > 0.0)) throw ConfigError("poisson mu must be > 0");
      if (!(poisson.R_max > 0.0)) throw ConfigError("poisson R_max must be > 0");
      if (poisson.radius_law == RadiusLaw::fixed && !(poisson.r > 0.0 && poisson.r <= poisson.R_max))
        throw ConfigError("fixed pore radius must lie in (0, R_max]");
      break;
    case Model::series_resistor:
      if (d != 1) throw ConfigError("series_resistor requires d = 1");
      if (!(series.p >= 0.0 && series.p <= 1.0)) throw ConfigError("series p must lie in [0,1]");
      break;
  }
}

double FieldConfig::locality_radius() const {
  const double diag = std::sqrt(static_cast<double>(d));
  return model == Model::poisson_pores ? poisson.R_max + diag : diag;
}

std::pair<double, double> FieldConfig::bounds() const {
  if (model == Model::series_resistor && series.dependent) return {1.0 / 3.0, 1.0};
  return {a_lo, a_hi};
}

void to_json(nlohmann::json& j, const FieldConfig& c) {
  j = nlohmann::json{{"model", c.model}, {"d", c.d}, {"L", c.L}, {"m", c.m}, {"a_lo", c.a_lo}, {"a_hi", c.a_hi}};
  nlohmann::json law{{"kind", c.checkerboard.law}, {"p", c.checkerboard.p}};
  j["checkerboard_law"] = law;
  nlohmann::json radius{{"kind", c.poisson.radius_law}, {"r", c.poisson.r}};
  j["poisson"] = {{"mu", c.poisson.mu}, {"R_max", c.poisson.R_max}, {"radius_law", radius}};
  j["series"] = {{"p", c.series.p}, {"dependent", c.series.dependent}};
}

void from_json(const nlohmann::json& j, FieldConfig& c) {
  FieldConfig def;
  c = def;
  c.model = j.value("model", def.model);
  c.d = j.value("d", def.d);
  c.L = j.value("L", def.L);
  c.m = j.value("m", def.m);
  c.a_lo = j.value("a_lo", def.a_lo);
  c.a_hi = j.value("a_hi", def.a_hi);
  if (j.contains("checkerboard_law")) {
    const auto& law = j.at("checkerboard_law");
    c.checkerboard.law = law.value("kind", def.checkerboard.law);
    c.checkerboard.p = law.value("p", def.checkerboard.p);
  }
  if (j.contains("poisson")) {
    const auto& p = j.at("poisson");
    c.poisson.mu = p.value("mu", def.poisson.mu);
    c.poisson.R_max = p.value("R_max", def.poisson.R_max);
    c.poisson.r = c.poisson.R_max;
    if (p.contains("radius_law")) {
      const auto& r = p.at("radius_law");
      c.poisson.radius_law = r.value("kind", def.poisson.radius_law);
      c.poisson.r = r.value("r", c.poisson.R_max);
    }
  }
  if (j.contains("series")) {
    const auto& s = j.at("series");
    c.series.p = s.value("p", def.series.p);
    c.series.dependent = s.value("dependent", def.series.dependent);
  }
}

void to_json(nlohmann::json& j, const LatentState& z) {
  auto site_json = [&](const SitePayload& s) {
    if (z.model != Model::poisson_pores) return nlohmann::json(s.value);
    nlohmann::json pores = nlohmann::json::array();
    for (const Pore& p : s.pores) {
      std::vector<double> c(p.center.begin(), p.center.begin() + z.d);
      pores.push_back({{"center", c}, {"radius", p.radius}});
    }
    return pores;
  };
  j = nlohmann::json{{"model", z.model}, {"d", z.d}, {"L", z.L}};
  nlohmann::json sites = nlohmann::json::array();
  for (const SitePayload& s : z.sites) sites.push_back(site_json(s));
  j["sites"] = std::move(sites);
  if (z.chain_end) j["chain_end"] = site_json(*z.chain_end);
}

void from_json(const nlohmann::json& j, LatentState& z) {
  z = LatentState{};
  j.at("model").get_to(z.model);
  j.at("d").get_to(z.d);
  j.at("L").get_to(z.L);
  auto parse_site = [&](const nlohmann::json& s) {
    SitePayload p;
    if (z.model != Model::poisson_pores) {
      p.value = s.get<double>();
      return p;
    }
    for (const auto& e : s) {
      Pore pore;
      const auto c = e.at("center").get<std::vector<double>>();
      for (std::size_t a = 0; a < c.size() && a < 3; ++a) pore.center[a] = c[a];
      pore.radius = e.at("radius").get<double>();
      p.pores.push_back(pore);
    }
    return p;
  };
  for (const auto& s : j.at("sites")) z.sites.push_back(parse_site(s));
  if (j.contains("chain_end")) z.chain_end = parse_site(j.at("chain_end"));
}

namespace {

SitePayload draw_site(const FieldConfig& c, Engine& eng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SitePayload s;
  switch (c.model) {
    case Model::checkerboard:
      if (c.checkerboard.law == CheckerboardLaw::two_point)
        s.value = unit(eng) < c.checkerboard.p ? c.a_hi : c.a_lo;
      else
        s.value = c.a_lo + (c.a_hi - c.a_lo) * unit(eng);
      break;
    case Model::poisson_pores: {
      std::poisson_distribution<int> count(c.poisson.mu);
      const int n = count(eng);
      s.pores.resize(static_cast<std::size_t>(n));
      for (Pore& p : s.pores) {
        for (int a = 0; a < c.d; ++a) p.center[a] = unit(eng);
        p.radius = c.poisson.radius_law == RadiusLaw::fixed ? c.poisson.r : c.poisson.R_max * (1.0 - unit(eng));
      }
      break;
    }
    case Model::series_resistor:
      s.value = unit(eng) < c.series.p ? 1.0 : 0.0;
      break;
  }
  return s;
}

SitePayload draw_site(const FieldConfig& c, std::uint64_t seed, std::size_t k) {
  Engine eng = derive_engine(seed, {static_cast<std::uint64_t>(k)});
  return draw_site(c, eng);
}

void check_compatible(const LatentState& z, const FieldConfig& c) {
  if (z.model != c.model || z.d != c.d || z.L != c.L || z.sites.size() != c.site_count())
    throw ConfigError("latent state does not match field configuration");
}

}  // namespace

LatentState sample_latent(const FieldConfig& config, std::uint64_t seed) {
  config.validate();
  LatentState z;
  z.model = config.model;
  z.d = config.d;
  z.L = config.L;
  const std::size_t n = config.site_count();
  z.sites.reserve(n);
  for (std::size_t k = 0; k < n; ++k) z.sites.push_back(draw_site(config, seed, k));
  if (config.model == Model::series_resistor && config.series.dependent) z.chain_end = draw_site(config, seed, n);
  return z;
}

LatentState resample_site(const LatentState& z, const FieldConfig& config, std::size_t k, std::uint64_t seed) {
  check_compatible(z, config);
  if (k >= z.sites.size()) throw ConfigError("site index out of range");
  LatentState out = z;
  out.sites[k] = draw_site(config, seed, k);
  return out;
}

LatentState replace_site(const LatentState& z, const LatentState& source, std::size_t k) {
  if (k >= z.sites.size() || source.sites.size() != z.sites.size())
    throw ConfigError("site index out of range");
  LatentState out = z;
  out.sites[k] = source.sites[k];
  return out;
}

LatentState shift_latent(const LatentState& z, const Index3& shift) {
  LatentState out = z;
  for (std::size_t k = 0; k < z.sites.size(); ++k) {
    Index3 x = lattice_coords(z.d, z.L, k);
    for (int a = 0; a < z.d; ++a) x[a] += shift[a];
    out.sites[lattice_flat(z.d, z.L, x)] = z.sites[k];
  }
  return out;
}

std::vector<double> series_conductivities(const FieldConfig& config, const LatentState& z) {
  if (config.d != 1 || config.model != Model::series_resistor)
    throw ConfigError("series conductivities require the d = 1 series model");
  check_compatible(z, config);
  const std::size_t L = z.sites.size();
  std::vector<double> a(L);
  if (config.series.dependent) {
    if (!z.chain_end) throw ConfigError("dependent series chain is missing its end site");
    for (std::size_t k = 0; k < L; ++k) {
      const double next = k + 1 < L ? z.sites[k + 1].value : z.chain_end->value;
      a[k] = 1.0 / (2.0 + next - z.sites[k].value);
    }
  } else {
    for (std::size_t k = 0; k < L; ++k) a[k] = config.a_lo + (config.a_hi - config.a_lo) * z.sites[k].value;
  }
  return a;
}

double harmonic_mean(const std::vector<double>& a) {
  double s = 0.0;
  for (double x : a) s += 1.0 / x;
  return static_cast<double>(a.size()) / s;
}

CoefficientField realize(const LatentState& z, const FieldConfig& config) {
  config.validate();
  check_compatible(z, config);
  CoefficientField field{config.grid(), {}};
  const PeriodicGrid& g = field.grid;
  field.values.assign(g.size(), config.a_lo);

  auto unit_cube_of = [&](std::size_t cell) {
    Index3 x = g.coords(cell);
    for (int a = 0; a < config.d; ++a) x[a] /= config.m;
    return lattice_flat(config.d, config.L, x);
  };

  switch (config.model) {
    case Model::checkerboard:
      for (std::size_t c = 0; c < g.size(); ++c) field.values[c] = z.sites[unit_cube_of(c)].value;
      break;
    case Model::series_resistor: {
      const std::vector<double> a = series_conductivities(config, z);
      for (std::size_t c = 0; c < g.size(); ++c) field.values[c] = a[unit_cube_of(c)];
      break;
    }
    case Model::poisson_pores:
      for (std::size_t k = 0; k < z.sites.size(); ++k) {
        const Index3 corner = lattice_coords(config.d, config.L, k);
        for (const Pore& p : z.sites[k].pores) {
          Point3 centre{0.0, 0.0, 0.0};
          for (int a = 0; a < config.d; ++a) centre[a] = corner[a] + p.center[a];
          for (std::size_t c : g.cells_within(centre, p.radius)) field.values[c] = config.a_hi;
        }
      }
      break;
  }
  return field;
}

}  // namespace rcflux

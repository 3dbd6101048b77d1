#include <doctest.h>

#include <cmath>

#include "rcflux/errors.hpp"
#include "rcflux/fields.hpp"

using namespace rcflux;

namespace {

FieldConfig poisson_config() {
  FieldConfig c;
  c.model = Model::poisson_pores;
  c.d = 2;
  c.L = 4;
  c.m = 4;
  c.poisson.mu = 1.5;
  c.poisson.R_max = 0.6;
  c.poisson.radius_law = RadiusLaw::uniform;
  return c;
}

FieldConfig series_config(bool dependent) {
  FieldConfig c;
  c.model = Model::series_resistor;
  c.d = 1;
  c.L = 16;
  c.m = 2;
  c.series.dependent = dependent;
  return c;
}

}  // namespace

TEST_CASE("validation rejects inadmissible laws") {
  FieldConfig c;
  CHECK_NOTHROW(c.validate());
  c.d = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = FieldConfig{};
  c.a_lo = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = FieldConfig{};
  c.a_lo = 5.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = FieldConfig{};
  c.checkerboard.p = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = series_config(false);
  c.d = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = poisson_config();
  c.poisson.radius_law = RadiusLaw::fixed;
  c.poisson.r = 0.9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("sampling is a pure function of the seed") {
  const FieldConfig c;
  CHECK(sample_latent(c, 11) == sample_latent(c, 11));
  CHECK_FALSE(sample_latent(c, 11) == sample_latent(c, 12));
}

TEST_CASE("site k depends only on (seed, k)") {
  FieldConfig small, big;
  small.L = 2;
  big.L = 4;
  const auto a = sample_latent(small, 5), b = sample_latent(big, 5);
  for (std::size_t k = 0; k < a.sites.size(); ++k) CHECK(a.sites[k] == b.sites[k]);
}

TEST_CASE("resample_site with the generating seed is the identity") {
  const FieldConfig c = poisson_config();
  const LatentState z = sample_latent(c, 3);
  for (std::size_t k = 0; k < z.sites.size(); ++k) CHECK(resample_site(z, c, k, 3) == z);
  const LatentState z2 = resample_site(z, c, 2, 99);
  for (std::size_t k = 0; k < z.sites.size(); ++k)
    if (k != 2) CHECK(z2.sites[k] == z.sites[k]);
}

TEST_CASE("replace_site copies exactly one site") {
  const FieldConfig c;
  const LatentState z = sample_latent(c, 1), src = sample_latent(c, 2);
  const LatentState r = replace_site(z, src, 7);
  for (std::size_t k = 0; k < z.sites.size(); ++k) CHECK(r.sites[k] == (k == 7 ? src.sites[k] : z.sites[k]));
  CHECK_THROWS_AS(replace_site(z, src, 16), ConfigError);
}

TEST_CASE("two_point frequencies follow p") {
  FieldConfig c;
  c.L = 40;
  c.checkerboard.p = 0.3;
  const LatentState z = sample_latent(c, 8);
  double hi = 0;
  for (const auto& s : z.sites) {
    CHECK((s.value == c.a_lo || s.value == c.a_hi));
    hi += s.value == c.a_hi;
  }
  const double n = static_cast<double>(z.sites.size());
  CHECK(std::abs(hi / n - 0.3) < 4.0 * std::sqrt(0.21 / n));
}

TEST_CASE("checkerboard cells copy their unit cube") {
  FieldConfig c;
  c.checkerboard.law = CheckerboardLaw::uniform;
  const LatentState z = sample_latent(c, 4);
  const CoefficientField f = realize(z, c);
  for (std::size_t cell = 0; cell < f.grid.size(); ++cell) {
    Index3 k = f.grid.coords(cell);
    for (int a = 0; a < 2; ++a) k[a] /= c.m;
    CHECK(f.at(cell) == z.sites[lattice_flat(2, c.L, k)].value);
    CHECK(f.at(cell) >= c.a_lo);
    CHECK(f.at(cell) <= c.a_hi);
  }
}

TEST_CASE("poisson pores mark exactly the cells inside some pore") {
  const FieldConfig c = poisson_config();
  const LatentState z = sample_latent(c, 21);
  const CoefficientField f = realize(z, c);
  for (std::size_t cell = 0; cell < f.grid.size(); ++cell) {
    bool inside = false;
    for (std::size_t k = 0; k < z.sites.size(); ++k) {
      const Index3 corner = lattice_coords(2, c.L, k);
      for (const Pore& p : z.sites[k].pores) {
        CHECK(p.radius <= c.poisson.R_max);
        const Point3 centre{corner[0] + p.center[0], corner[1] + p.center[1], 0.0};
        inside = inside || f.grid.torus_distance(centre, f.grid.center(cell)) < p.radius;
      }
    }
    CHECK(f.at(cell) == (inside ? c.a_hi : c.a_lo));
  }
}

TEST_CASE("resampling site j changes the field only within the locality radius") {
  for (const FieldConfig& c : {FieldConfig{}, poisson_config()}) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const LatentState z = sample_latent(c, s);
      const std::size_t j = 5;
      const LatentState zj = resample_site(z, c, j, 1000 + s);
      const CoefficientField f = realize(z, c), fj = realize(zj, c);
      const Index3 jc = lattice_coords(2, c.L, j);
      const Point3 pj{double(jc[0]), double(jc[1]), 0.0};
      for (std::size_t cell = 0; cell < f.grid.size(); ++cell)
        if (f.at(cell) != fj.at(cell)) CHECK(f.grid.torus_distance(pj, f.grid.center(cell)) < c.locality_radius());
    }
  }
}

TEST_CASE("shift_latent translates the field") {
  const FieldConfig c;
  const LatentState z = sample_latent(c, 2);
  const CoefficientField f = realize(z, c), fs = realize(shift_latent(z, {1, 3, 0}), c);
  CHECK(fs.values == f.grid.shifted(f.values, {c.m, 3 * c.m, 0}));
}

TEST_CASE("dependent series telescopes") {
  const FieldConfig c = series_config(true);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const LatentState z = sample_latent(c, s);
    REQUIRE(z.chain_end.has_value());
    const auto a = series_conductivities(c, z);
    for (double x : a) {
      CHECK(x >= 1.0 / 3.0);
      CHECK(x <= 1.0);
    }
    const double inv = 1.0 / harmonic_mean(a);
    CHECK(inv == doctest::Approx(2.0 + (z.chain_end->value - z.sites.front().value) / c.L).epsilon(1e-14));
  }
  const auto [lo, hi] = c.bounds();
  CHECK(lo == doctest::Approx(1.0 / 3.0));
  CHECK(hi == doctest::Approx(1.0));
}

TEST_CASE("independent series uses a_lo and a_hi") {
  const FieldConfig c = series_config(false);
  const LatentState z = sample_latent(c, 0);
  CHECK_FALSE(z.chain_end.has_value());
  for (double x : series_conductivities(c, z)) CHECK((x == c.a_lo || x == c.a_hi));
}

TEST_CASE("harmonic mean") { CHECK(harmonic_mean({1.0, 4.0}) == doctest::Approx(1.6)); }

TEST_CASE("JSON round trips") {
  const FieldConfig c = poisson_config();
  CHECK(nlohmann::json(c).get<FieldConfig>() == c);
  const FieldConfig s = series_config(true);
  CHECK(nlohmann::json(s).get<FieldConfig>() == s);
  const LatentState z = sample_latent(c, 6);
  CHECK(nlohmann::json(z).get<LatentState>() == z);
  const LatentState zs = sample_latent(s, 6);
  CHECK(nlohmann::json(zs).get<LatentState>() == zs);
}

TEST_CASE("realize rejects mismatched states") {
  FieldConfig c;
  const LatentState z = sample_latent(c, 0);
  c.L = 5;
  CHECK_THROWS_AS(realize(z, c), ConfigError);
}

#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rcflux/grid.hpp"

namespace rcflux {

enum class Model { checkerboard, poisson_pores, series_resistor };
enum class CheckerboardLaw { two_point, uniform };
enum class RadiusLaw { fixed, uniform };

/// Law of the random coefficient and the grid it is realized on.
struct FieldConfig {
  Model model = Model::checkerboard;
  int d = 2;
  int L = 4;
  int m = 4;  // cells per unit length
  double a_lo = 1.0;
  double a_hi = 4.0;

  struct Checkerboard {
    CheckerboardLaw law = CheckerboardLaw::two_point;
    double p = 0.5;  // P(Z_k = a_hi) under two_point
    bool operator==(const Checkerboard&) const = default;
  } checkerboard;

  struct Poisson {
    double mu = 0.5;
    double R_max = 0.5;
    RadiusLaw radius_law = RadiusLaw::fixed;
    double r = 0.5;  // radius under the fixed law
    bool operator==(const Poisson&) const = default;
  } poisson;

  struct Series {
    double p = 0.5;
    bool dependent = false;
    bool operator==(const Series&) const = default;
  } series;

  /// Throws ConfigError when the law or grid is not admissible.
  void validate() const;

  /// Distance beyond which a cell does not depend on a given site.
  double locality_radius() const;

  /// Ellipticity bounds {a_*, a^*} actually attained by the model.
  std::pair<double, double> bounds() const;

  std::size_t site_count() const { return lattice_size(d, L); }
  PeriodicGrid grid() const { return PeriodicGrid(d, L, m); }

  bool operator==(const FieldConfig&) const = default;
};

void to_json(nlohmann::json& j, const FieldConfig& c);
void from_json(const nlohmann::json& j, FieldConfig& c);

/// Pore of the Poisson model; centre is relative to the owning site corner.
struct Pore {
  Point3 center{0.0, 0.0, 0.0};
  double radius = 0.0;
  bool operator==(const Pore&) const = default;
};

/// Payload of one lattice site. Checkerboard and series sites use `value`;
/// Poisson sites use `pores`.
struct SitePayload {
  double value = 0.0;
  std::vector<Pore> pores;
  bool operator==(const SitePayload&) const = default;
};

/// The i.i.d. site variables Z = {Z_k} driving the coefficient field.
struct LatentState {
  Model model = Model::checkerboard;
  int d = 0;
  int L = 0;
  std::vector<SitePayload> sites;  // L^d entries, lattice row-major
  /// Z_{L+1} of the dependent series chain; empty for every other model.
  std::optional<SitePayload> chain_end;

  bool operator==(const LatentState&) const = default;
};

void to_json(nlohmann::json& j, const LatentState& z);
void from_json(const nlohmann::json& j, LatentState& z);

/// Scalar conductivity sampled at cell centres of a periodic grid.
struct CoefficientField {
  PeriodicGrid grid;
  std::vector<double> values;

  double at(std::size_t cell) const { return values[cell]; }
};

/// Draws every site from its own stream derived from (seed, k).
LatentState sample_latent(const FieldConfig& config, std::uint64_t seed);

/// Copy of z with only site k redrawn from the stream (seed, k). Using the
/// seed that produced z reproduces z exactly.
LatentState resample_site(const LatentState& z, const FieldConfig& config, std::size_t k, std::uint64_t seed);

/// Copy of z with site k taken from `source`.
LatentState replace_site(const LatentState& z, const LatentState& source, std::size_t k);

/// Lattice translation: result site (k + shift) carries z's site k.
LatentState shift_latent(const LatentState& z, const Index3& shift);

CoefficientField realize(const LatentState& z, const FieldConfig& config);

/// Unit-cell conductivities a_1..a_L of the d = 1 series chain.
std::vector<double> series_conductivities(const FieldConfig& config, const LatentState& z);

/// Effective conductivity of resistors in series: (L^{-1} Σ 1/a_k)^{-1}.
double harmonic_mean(const std::vector<double>& a);

}  // namespace rcflux

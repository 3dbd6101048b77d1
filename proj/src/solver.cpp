#include "rcflux/solver.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>

#include "rcflux/errors.hpp"

namespace rcflux {

NLOHMANN_JSON_SERIALIZE_ENUM(Preconditioner, {{Preconditioner::none, "none"}, {Preconditioner::diagonal, "diagonal"}})

void SolveConfig::validate() const {
  if (!(rel_tolerance > 0.0)) throw ConfigError("rel_tolerance must be > 0");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
}

void to_json(nlohmann::json& j, const SolveConfig& c) {
  j = nlohmann::json{{"rel_tolerance", c.rel_tolerance},
                     {"max_iterations", c.max_iterations},
                     {"preconditioner", c.preconditioner}};
}

void from_json(const nlohmann::json& j, SolveConfig& c) {
  const SolveConfig def;
  c.rel_tolerance = j.value("rel_tolerance", def.rel_tolerance);
  c.max_iterations = j.value("max_iterations", def.max_iterations);
  c.preconditioner = j.value("preconditioner", def.preconditioner);
}

DiscreteOperator::DiscreteOperator(CoefficientField field, double beta) : field_(std::move(field)), beta_(beta) {
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  const PeriodicGrid& g = field_.grid;
  if (field_.values.size() != g.size()) throw ConfigError("field size does not match its grid");
  const double h = g.spacing();
  face_scale_ = std::pow(h, g.dim() - 2);
  mass_ = beta_ * g.cell_volume();
  diagonal_.assign(g.size(), mass_);
  for (int a = 0; a < g.dim(); ++a) {
    faces_[a].resize(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) {
      const std::size_t nb = g.neighbor(c, a, +1);
      const double k = face_mean(field_.values[c], field_.values[nb]);
      faces_[a][c] = k;
      diagonal_[c] += face_scale_ * k;
      diagonal_[nb] += face_scale_ * k;
    }
  }
}

void DiscreteOperator::apply(std::span<const double> u, std::span<double> out) const {
  const PeriodicGrid& g = field_.grid;
  const std::size_t n = g.size();
  for (std::size_t c = 0; c < n; ++c) out[c] = mass_ * u[c];
  for (int a = 0; a < g.dim(); ++a) {
    const std::vector<double>& k = faces_[a];
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t nb = g.neighbor(c, a, +1);
      const double flux = face_scale_ * k[c] * (u[c] - u[nb]);
      out[c] += flux;
      out[nb] -= flux;
    }
  }
}

std::vector<double> DiscreteOperator::corrector_rhs() const {
  const PeriodicGrid& g = field_.grid;
  const double scale = std::pow(g.spacing(), g.dim() - 1);
  std::vector<double> b(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) {
    const std::size_t back = g.neighbor(c, 0, -1);
    b[c] = scale * (faces_[0][c] - faces_[0][back]);
  }
  return b;
}

DiscreteOperator assemble(const CoefficientField& field, double beta) { return DiscreteOperator(field, beta); }

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void remove_mean(std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

}  // namespace

LinearSolveResult solve_linear(const DiscreteOperator& op, std::span<const double> rhs, const SolveConfig& cfg,
                               std::span<const double> initial) {
  cfg.validate();
  const std::size_t n = op.grid().size();
  if (rhs.size() != n) throw ConfigError("right-hand side size does not match the grid");
  const bool singular = op.beta() == 0.0;

  std::vector<double> b(rhs.begin(), rhs.end());
  const double bnorm = std::sqrt(dot(b, b));
  LinearSolveResult res;
  res.x.assign(n, 0.0);
  if (bnorm == 0.0) return res;
  if (singular) {
    const double total = std::accumulate(b.begin(), b.end(), 0.0);
    if (std::abs(total) > 1e-8 * bnorm * std::sqrt(static_cast<double>(n)))
      throw ConfigError("right-hand side is incompatible with the periodic null space");
    remove_mean(b);
  }
  if (!initial.empty()) {
    if (initial.size() != n) throw ConfigError("initial guess size does not match the grid");
    res.x.assign(initial.begin(), initial.end());
    if (singular) remove_mean(res.x);
  }

  const std::vector<double>& diag = op.diagonal();
  std::vector<double> r(n), z(n), p(n), q(n);
  auto precondition = [&] {
    if (cfg.preconditioner == Preconditioner::diagonal)
      for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    else
      z = r;
    if (singular) remove_mean(z);
  };
  auto true_residual = [&] {
    op.apply(res.x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    if (singular) remove_mean(r);
    return std::sqrt(dot(r, r));
  };

  const double target = cfg.rel_tolerance * bnorm;
  double rnorm = true_residual();
  // Recursive residuals drift from the true one; restart from the current
  // iterate until the true residual meets the target.
  while (rnorm > target) {
    if (res.iterations >= cfg.max_iterations)
      throw SolveError("conjugate gradients did not converge", rnorm / bnorm, res.iterations);
    precondition();
    p = z;
    double rz = dot(r, z);
    while (rnorm > target && res.iterations < cfg.max_iterations) {
      op.apply(p, q);
      const double alpha = rz / dot(p, q);
      for (std::size_t i = 0; i < n; ++i) {
        res.x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      ++res.iterations;
      rnorm = std::sqrt(dot(r, r));
      if (rnorm <= target) break;
      precondition();
      const double rz_next = dot(r, z);
      const double step = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + step * p[i];
    }
    if (singular) remove_mean(res.x);
    rnorm = true_residual();
  }
  res.residual_norm = rnorm / bnorm;
  return res;
}

double flux_energy(std::span<const double> phi, const CoefficientField& field, double beta) {
  const PeriodicGrid& g = field.grid;
  const double h = g.spacing();
  double faces = 0.0, mass = 0.0;
  for (std::size_t c = 0; c < g.size(); ++c) {
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t nb = g.neighbor(c, a, +1);
      const double k = face_mean(field.values[c], field.values[nb]);
      const double grad = (phi[nb] - phi[c]) / h + (a == 0 ? 1.0 : 0.0);
      faces += k * grad * grad;
    }
    mass += phi[c] * phi[c];
  }
  return (faces + beta * mass) * g.cell_volume() / g.domain_volume();
}

double flux_energy(const CorrectorSolution& sol, const CoefficientField& field, double beta) {
  return flux_energy(sol.phi, field, beta);
}

double flux_linear(std::span<const double> phi, const CoefficientField& field) {
  const PeriodicGrid& g = field.grid;
  const double h = g.spacing();
  double s = 0.0;
  for (std::size_t c = 0; c < g.size(); ++c) {
    const std::size_t nb = g.neighbor(c, 0, +1);
    s += face_mean(field.values[c], field.values[nb]) * (1.0 + (phi[nb] - phi[c]) / h);
  }
  return s * g.cell_volume() / g.domain_volume();
}

double flux_linear(const CorrectorSolution& sol, const CoefficientField& field) {
  return flux_linear(sol.phi, field);
}

CorrectorSolution solve_corrector(const CoefficientField& field, double beta, const SolveConfig& cfg,
                                  std::span<const double> initial) {
  const DiscreteOperator op(field, beta);
  const std::vector<double> b = op.corrector_rhs();
  LinearSolveResult lin = solve_linear(op, b, cfg, initial);
  CorrectorSolution sol;
  sol.grid = field.grid;
  sol.phi = std::move(lin.x);
  sol.beta = beta;
  sol.residual_norm = lin.residual_norm;
  sol.iterations = lin.iterations;
  sol.gamma_energy = flux_energy(sol.phi, field, beta);
  sol.gamma_linear = flux_linear(sol.phi, field);
  return sol;
}

void to_json(nlohmann::json& j, const CorrectorSolution& s) {
  j = nlohmann::json{{"d", s.grid.dim()},
                     {"L", s.grid.period()},
                     {"m", s.grid.resolution()},
                     {"beta", s.beta},
                     {"gamma_energy", s.gamma_energy},
                     {"gamma_linear", s.gamma_linear},
                     {"residual_norm", s.residual_norm},
                     {"iterations", s.iterations}};
}

std::vector<double> cell_gradient_energy(std::span<const double> phi, const PeriodicGrid& g) {
  const double h = g.spacing();
  std::vector<double> e(g.size(), 0.0);
  for (std::size_t c = 0; c < g.size(); ++c) {
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t nb = g.neighbor(c, a, +1);
      const double grad = (phi[nb] - phi[c]) / h + (a == 0 ? 1.0 : 0.0);
      e[c] += 0.5 * grad * grad;
      e[nb] += 0.5 * grad * grad;
    }
  }
  return e;
}

PhiEnergies phi_energies(const CorrectorSolution& sol, std::size_t j, double tau) {
  const PeriodicGrid& g = sol.grid;
  const Index3 k = lattice_coords(g.dim(), g.period(), j);
  const std::vector<double> e = cell_gradient_energy(sol.phi, g);
  double cube = 0.0, ball = 0.0;
  for (std::size_t c : g.cells_in_unit_cube(k)) cube += e[c];
  for (std::size_t c : g.cells_within({double(k[0]), double(k[1]), double(k[2])}, tau)) ball += e[c];
  return {std::sqrt(cube * g.cell_volume()), std::sqrt(ball * g.cell_volume())};
}

void write_phi_binary(const std::filesystem::path& path, const CorrectorSolution& sol) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  const std::int32_t header[3] = {sol.grid.dim(), sol.grid.period(), sol.grid.resolution()};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(sol.phi.data()), static_cast<std::streamsize>(sol.phi.size() * sizeof(double)));
}

std::vector<double> read_phi_binary(const std::filesystem::path& path, int& d, int& L, int& m) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::int32_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  d = header[0];
  L = header[1];
  m = header[2];
  const PeriodicGrid g(d, L, m);
  std::vector<double> phi(g.size());
  in.read(reinterpret_cast<char*>(phi.data()), static_cast<std::streamsize>(phi.size() * sizeof(double)));
  if (!in) throw ConfigError("truncated phi dump " + path.string());
  return phi;
}

}  // namespace rcflux

#pragma once

#include <stdexcept>
#include <string>

namespace rcflux {

/// Invalid configuration or violated precondition; nothing was computed.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative solve stopped at max_iterations without reaching its tolerance.
class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, double last_residual, int iterations)
      : std::runtime_error(what), last_residual_(last_residual), iterations_(iterations) {}

  double last_residual() const { return last_residual_; }
  int iterations() const { return iterations_; }

 private:
  double last_residual_;
  int iterations_;
};

/// A campaign ran but could not produce a trustworthy result (for example,
/// too many replicas failed to solve).
class CampaignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rcflux

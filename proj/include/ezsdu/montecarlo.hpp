#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ezsdu/closed_form.hpp"
#include "ezsdu/params.hpp"

namespace ezsdu {

struct SimulationSpec {
  int n_paths = 100000;
  int n_steps = 100;
  double horizon = 50.0;
  std::uint64_t seed = 1;
  double x0 = 1.0;
};

/// Wealth paths under a constant proportional strategy, exact log stepping.
/// Path p uses its own generator seeded from (seed, p).
struct PathBatch {
  int n_paths = 0;
  int n_steps = 0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  Strategy strategy;
  /// Row-major: path p, grid point k at paths[p * (n_steps + 1) + k].
  std::vector<double> paths;

  double dt() const { return horizon / n_steps; }
  double X(int path, int k) const { return paths[static_cast<std::size_t>(path) * (n_steps + 1) + k]; }
};

PathBatch simulate(const Strategy& strategy, const MarketParams& market, const SimulationSpec& spec);

/// V_t = a(t) (xi X_t)^{1-R} / (1-R) for a deterministic coefficient a.
struct Candidate {
  Strategy strategy;
  std::function<double(double)> coefficient;

  /// a = scale * (theta/H)^theta.
  static Candidate proportional(const Strategy& strategy, const PreferenceParams& prefs,
                                double scale = 1.0);
  static Candidate family(const ImproperFamilyMember& member);
};

struct ResidualEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  double z() const { return std_error > 0.0 ? estimate / std_error : 0.0; }
};

/// V_0 - E[int_0^T f_EZ(C_s, V_s) ds + V_T] with trapezoid quadrature on
/// the batch grid.
ResidualEstimate residual_estimate(const Candidate& candidate, const PathBatch& batch,
                                   const PreferenceParams& prefs);

}  // namespace ezsdu

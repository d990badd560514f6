#pragma once

#include <optional>
#include <vector>

#include "ezsdu/lattice.hpp"
#include "ezsdu/params.hpp"

namespace ezsdu {

/// Additive source eps e^{nu t} Lambda_t^theta in the aggregator
/// h(u, w) = u w^rho. An empty Lambda means Lambda = U.
struct PerturbationSpec {
  double epsilon = 0.0;
  double nu = 0.0;
  std::optional<AdaptedProcess> Lambda;
};

struct SelfOrderConstants {
  double k = 0.0;
  double K = 0.0;
};

struct OrderRoots {
  double A = 0.0;
  double B = 0.0;
};

/// Invariant band of the perturbed fixed-point map: for U^theta in SO(k, K),
/// the fixed point W lies in [kA J, KB J]. eps_low/eps_high bound the source
/// relative to the increments of J; both equal epsilon when Lambda = U, nu = 0.
struct OrderCertificate {
  double k = 0.0;
  double K = 0.0;
  double A = 0.0;
  double B = 0.0;
  double eps_low = 0.0;
  double eps_high = 0.0;
  AdaptedProcess J;
  AdaptedProcess lower;
  AdaptedProcess upper;
  /// Whether the returned solution sits inside [lower, upper].
  bool contained = false;
};

struct PicardOptions {
  double tol = 1e-12;
  int max_iter = 1000;
  /// RK4 substeps per lattice step, used only when epsilon > 0.
  int substeps = 8;
  /// Starting iterate; defaults to the upper band B U^theta.
  std::optional<AdaptedProcess> initial;
};

struct PicardResult {
  AdaptedProcess W;
  OrderCertificate certificate;
  int iterations = 0;
  /// Node-wise relative sup gap between consecutive iterates.
  std::vector<double> gaps;
};

struct ExtremalOptions {
  /// Decreasing to zero; defaults to 2^{-n}, n = 1..20.
  std::vector<double> eps_sequence;
  double tol = 1e-7;
  int substeps = 8;
};

struct ExtremalResult {
  AdaptedProcess W;
  int levels = 0;
  double last_gap = 0.0;
  bool converged = false;
  double nu = 0.0;
};

/// J_t = E_t[int_t^inf e^{weight_rate s} U_s^theta ds] by backward accumulation.
AdaptedProcess compute_J(const AdaptedProcess& U, const TailCondition& tail, const Lattice& lattice,
                         const PreferenceParams& prefs, double weight_rate = 0.0);

/// Tightest k <= e^{w t} U^theta / J <= K over nodes with J > 0. Throws
/// NotSelfOrder when some node has J = 0 < U or U = 0 < J, or no node has J > 0.
SelfOrderConstants self_order_constants(const AdaptedProcess& U, const AdaptedProcess& J,
                                        const Lattice& lattice, const PreferenceParams& prefs,
                                        double weight_rate = 0.0);

/// Positive roots of A = (A^rho + eps_low)/K and B = (B^rho + eps_high)/k by
/// bisection; A = K^{-theta}, B = k^{-theta} for zero perturbation.
OrderRoots solve_AB(double k, double K, double eps_low, double eps_high,
                    const PreferenceParams& prefs);
inline OrderRoots solve_AB(double k, double K, double epsilon, const PreferenceParams& prefs) {
  return solve_AB(k, K, epsilon, epsilon, prefs);
}

/// Picard iteration W <- F^eps(W) on the lattice. Within a step the iterate
/// follows the aggregator dynamics from its left-node value. Throws
/// NoContraction when no certificate exists, MaxIterExceeded otherwise.
PicardResult picard_solve(const AdaptedProcess& U, const PerturbationSpec& perturbation,
                          const TailCondition& tail, const Lattice& lattice,
                          const PreferenceParams& prefs, const PicardOptions& options = {});

/// Direct backward induction for the perturbed aggregator. The within-step
/// ODE is integrated with fixed-substep RK4 when epsilon > 0 and in closed
/// form otherwise.
AdaptedProcess solve_perturbed(const AdaptedProcess& U, const PerturbationSpec& perturbation,
                               const TailCondition& tail, const Lattice& lattice,
                               const PreferenceParams& prefs, int substeps = 8);

/// Largest nu on a fixed scan for which e^{nu theta t} Lambda^theta keeps
/// finite self-order constants, with Lambda continuing proportionally.
double default_nu(const AdaptedProcess& Lambda, const Lattice& lattice,
                  const PreferenceParams& prefs);

/// Maximal solution as the decreasing limit of perturbed solutions with
/// U^n = max(U, e^{nu t} Lambda / n) and source eps_n e^{nu theta t} Lambda^theta.
/// Throws NotDominated unless U <= Lambda node-wise.
ExtremalResult extremal_solve(const AdaptedProcess& U, const AdaptedProcess& Lambda,
                              std::optional<double> nu, const TailCondition& tail,
                              const Lattice& lattice, const PreferenceParams& prefs,
                              const ExtremalOptions& options = {});

}  // namespace ezsdu

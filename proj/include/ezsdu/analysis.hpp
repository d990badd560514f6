#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ezsdu/fixed_point.hpp"
#include "ezsdu/lattice.hpp"
#include "ezsdu/params.hpp"

namespace ezsdu {

/// Default relative floor below which W counts as zero.
inline constexpr double kZeroTolerance = 1e-10;

struct CrraOrder {
  double lower = 0.0;
  double upper = 0.0;
};

struct Properness {
  bool proper = true;
  /// Nodes with J > 0 and W numerically zero.
  std::vector<NodeIndex> witnesses;
};

struct ComparisonResult {
  bool holds = true;
  std::optional<NodeIndex> first_violation;
  /// Largest (W1 - W2) / max(W1, W2) over nodes, or 0.
  double worst_excess = 0.0;
};

struct SolutionReport {
  std::string label;
  double residual = 0.0;
  bool proper = false;
  std::vector<NodeIndex> witnesses;
  std::optional<CrraOrder> crra_order;
  std::optional<double> extremal_gap;
  bool concept_agreement = false;
  std::string note;
};

/// Largest relative defect of the step equation over non-terminal nodes:
/// |forward_step(W_i, I_i) - E_i[W_{i+1}]| / max(W_i, E_i[W_{i+1}]).
/// The forward map absorbs at zero, so every family member including the
/// zero process scores 0 up to rounding.
double residual(const AdaptedProcess& W, const AdaptedProcess& U, const Lattice& lattice,
                const PreferenceParams& prefs);

/// W is zero at a node when W <= tol * kappa * J with kappa = max W/J.
/// Proper iff no node has J > 0 and W zero.
Properness is_proper(const AdaptedProcess& W, const AdaptedProcess& J,
                     double tol = kZeroTolerance);

/// Tightest k <= W/J <= K over J > 0 nodes; absent if W is not proper.
std::optional<CrraOrder> crra_order_check(const AdaptedProcess& W, const AdaptedProcess& J,
                                          double tol = kZeroTolerance);

/// Node-wise W1 <= W2 with relative slack. Throws HypothesisUnmet unless
/// eps2 > 0, eps1 <= eps2, U1 <= U2 and (if given) U2 <= Lambda.
ComparisonResult comparison_check(const AdaptedProcess& W1, const AdaptedProcess& W2,
                                  const AdaptedProcess& U1, const AdaptedProcess& U2, double eps1,
                                  double eps2, const std::optional<AdaptedProcess>& Lambda,
                                  const Lattice& lattice, double slack = 1e-12);

struct AgreementOptions {
  double tolerance = 1e-4;
  PicardOptions picard;
  ExtremalOptions extremal;
};

/// Picard (epsilon = 0) against the extremal limit with Lambda = U. A
/// failed self-order precondition is reported in the note, not thrown.
SolutionReport concept_agreement(const AdaptedProcess& U, const TailCondition& tail,
                                 const Lattice& lattice, const PreferenceParams& prefs,
                                 const AgreementOptions& options = {});

/// W_i = A(t_i) (xi X_i)^{1-R} for every A0, classified against J of the
/// proportional stream of the lattice strategy.
AdaptedProcess embed_family_member(double A0, const Lattice& lattice,
                                   const PreferenceParams& prefs);
std::vector<SolutionReport> improper_family_demo(const Strategy& strategy,
                                                 std::span<const double> A0_list,
                                                 const Lattice& lattice,
                                                 const PreferenceParams& prefs);

}  // namespace ezsdu

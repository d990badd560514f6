#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ezsdu/params.hpp"

namespace ezsdu {

/// How the up/down log-increments of wealth are chosen.
enum class Calibration {
  /// Match mean and variance of the log-increment
  /// sigma pi dB + (r + pi(mu-r) - xi - pi^2 sigma^2/2) dt. Weak order one.
  LogMoments,
  /// Match the variance and make E_i[X_{i+1}^{1-R}] = X_i^{1-R} e^{-H dt}
  /// hold exactly, so conditional expectations of the utility scale are exact.
  PowerMoment,
};

struct LatticeSpec {
  int n_steps = 1;
  double horizon = 1.0;
  double up_prob = 0.5;
  Calibration calibration = Calibration::LogMoments;
  double initial_wealth = 1.0;

  double step() const { return horizon / n_steps; }
};

struct NodeIndex {
  int step = 0;
  int node = 0;

  friend bool operator==(const NodeIndex&, const NodeIndex&) = default;
};

/// Flat storage offset of node j at step i of a recombining tree.
constexpr std::size_t node_offset(int step, int node) {
  return static_cast<std::size_t>(step) * (static_cast<std::size_t>(step) + 1) / 2 +
         static_cast<std::size_t>(node);
}

constexpr std::size_t node_count(int n_steps) { return node_offset(n_steps + 1, 0); }

/// Recombining binomial tree for the Brownian driver with wealth under a
/// constant proportional strategy. Node j at step i has had j up moves;
/// its children are (i+1, j) (down) and (i+1, j+1) (up). Immutable.
class Lattice {
 public:
  Lattice(const LatticeSpec& spec, const MarketParams& market, const PreferenceParams& prefs,
          const Strategy& strategy);

  const LatticeSpec& spec() const { return spec_; }
  const Strategy& strategy() const { return strategy_; }
  int n_steps() const { return spec_.n_steps; }
  double dt() const { return dt_; }
  double up_prob() const { return spec_.up_prob; }
  double time(int step) const { return step * dt_; }
  std::size_t size() const { return node_count(spec_.n_steps); }

  double wealth(int step, int node) const { return wealth_[node_offset(step, node)]; }
  double brownian(int step, int node) const;
  double up_log_increment() const { return up_; }
  double down_log_increment() const { return down_; }

  /// E_{(step,node)}[v] where next_level holds the values at step+1.
  double expect(std::span<const double> next_level, int node) const {
    return spec_.up_prob * next_level[node + 1] + (1.0 - spec_.up_prob) * next_level[node];
  }

  /// E[v_step] seen from the root, for values v on one level.
  double expectation_from_root(std::span<const double> level_values, int step) const;

 private:
  LatticeSpec spec_;
  Strategy strategy_;
  double dt_;
  double up_;
  double down_;
  std::vector<double> wealth_;
};

/// Nonnegative per-node values with a deterministic within-step profile
/// s -> value * exp(-decay (s - t_i)) on [t_i, t_{i+1}). decay = 0 is the
/// constant profile.
class AdaptedProcess {
 public:
  explicit AdaptedProcess(int n_steps = 0);

  int n_steps() const { return n_steps_; }
  std::size_t size() const { return values_.size(); }

  double value(int step, int node) const { return values_[node_offset(step, node)]; }
  double decay(int step, int node) const { return decay_[node_offset(step, node)]; }
  double value(NodeIndex n) const { return value(n.step, n.node); }

  /// Throws InvalidArgument for negative or non-finite values.
  void set(int step, int node, double value, double decay = 0.0);

  std::span<const double> values() const { return values_; }
  std::span<const double> level(int step) const {
    return std::span<const double>(values_).subspan(node_offset(step, 0), step + 1);
  }
  double max_value() const;

 private:
  int n_steps_;
  std::vector<double> values_;
  std::vector<double> decay_;
};

/// int_0^dt exp(rate s) ds.
double exp_integral(double rate, double dt);

/// int over the step of u(s)^power e^{weight_rate s}, s measured from t_i.
double step_integral(const AdaptedProcess& U, int step, int node, double dt, double power = 1.0,
                     double weight_rate = 0.0);

/// Boundary condition at the lattice horizon replacing [T_max, inf).
struct TailCondition {
  enum class Kind { Zero, Proportional, Explicit };

  Kind kind = Kind::Zero;
  /// Proportional: consumption continues with E_t[U_s^theta] = U_t^theta e^{-H(s-t)}.
  double H = 0.0;
  /// Explicit: terminal W and J values, one per node of the last level.
  std::vector<double> W_values;
  std::vector<double> J_values;

  static TailCondition zero() { return {}; }
  /// Throws OutsideD when strategy.H <= 0.
  static TailCondition proportional(const Strategy& strategy);
  static TailCondition explicit_values(std::vector<double> W, std::vector<double> J);
};

/// Terminal utility for the tail; source is the terminal value of an
/// additive perturbation eps e^{nu t} Lambda^theta (zero when unperturbed).
/// Proportional tails solve H w = u w^rho + source for the positive root.
double tail_W(const TailCondition& tail, double u, double source, int node,
              const PreferenceParams& prefs);

/// Terminal value of E_t[int_t^inf e^{weight_rate s} U_s^theta ds].
/// Throws NotSelfOrder when the weighted proportional tail diverges.
double tail_J(const TailCondition& tail, double u, double t, int node,
              const PreferenceParams& prefs, double weight_rate = 0.0);

/// Exact backward step of W' = -u W^rho across one step:
/// (xi^{1/theta} + I/theta)^theta with I = int u over the step.
double backward_step(double xi, double step_integral, const PreferenceParams& prefs);

/// The same ODE run forward from the left-node value, absorbed at zero:
/// (max(w^{1/theta} - I/theta, 0))^theta.
double forward_step(double w, double step_integral, const PreferenceParams& prefs);

Lattice build_lattice(const LatticeSpec& spec, const MarketParams& market,
                      const PreferenceParams& prefs, const Strategy& strategy);

/// U = theta C^{1-S} for C = xi X, with within-step decay H/theta so that
/// U^theta decays like its conditional mean.
AdaptedProcess proportional_consumption(const Lattice& lattice, const PreferenceParams& prefs);

/// Maximal solution of the discrete-filtration equation: W at the horizon
/// from the tail, then backward_step of the conditional mean of the children.
AdaptedProcess solve_backward(const AdaptedProcess& U, const TailCondition& tail,
                              const Lattice& lattice, const PreferenceParams& prefs);

/// Stopping times sigma <= tau on grid times, stored as the node sets
/// {sigma <= t_i} and {tau <= t_i}. Both sets are closed under passing to
/// children, so membership is decided by the current node. Nodes not
/// started by the horizon have sigma = inf; not stopped have tau = inf.
class StoppingSpec {
 public:
  /// Validates closure and stopped => started; throws InvalidArgument.
  StoppingSpec(int n_steps, std::vector<std::uint8_t> started, std::vector<std::uint8_t> stopped);

  /// Closes arbitrary seed sets under children and adds stopped nodes to
  /// the started set (sigma = tau there).
  static StoppingSpec from_seeds(int n_steps, std::vector<std::uint8_t> start_seeds,
                                 std::vector<std::uint8_t> stop_seeds);
  /// sigma = t_{sigma_step}, tau = t_{tau_step} (or inf).
  static StoppingSpec deterministic(int n_steps, int sigma_step, std::optional<int> tau_step);

  int n_steps() const { return n_steps_; }
  bool started(int step, int node) const { return started_[node_offset(step, node)] != 0; }
  bool stopped(int step, int node) const { return stopped_[node_offset(step, node)] != 0; }
  bool active(int step, int node) const { return started(step, node) && !stopped(step, node); }

 private:
  int n_steps_;
  std::vector<std::uint8_t> started_;
  std::vector<std::uint8_t> stopped_;
};

/// U_t = e^{-gamma t} 1{sigma <= t < tau} with exponential within-step profile.
AdaptedProcess indicator_consumption(double gamma, const StoppingSpec& stops,
                                     const Lattice& lattice);

/// Tail continuing e^{-gamma t} beyond the horizon on nodes still active:
/// W = e^{-gamma theta t}/(gamma theta)^theta, J = e^{-gamma theta t}/(gamma theta).
TailCondition indicator_tail(double gamma, const StoppingSpec& stops, const Lattice& lattice,
                             const PreferenceParams& prefs);

/// ((1/(gamma theta)) E_t[e^{-gamma(t v sigma)} - e^{-gamma(t v tau)}])^theta per node.
AdaptedProcess appendix_lower_bound(double gamma, const StoppingSpec& stops,
                                    const Lattice& lattice, const PreferenceParams& prefs);

}  // namespace ezsdu

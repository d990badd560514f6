#include "ezsdu/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ezsdu/error.hpp"

namespace ezsdu {

Lattice::Lattice(const LatticeSpec& spec, const MarketParams& market,
                 const PreferenceParams& prefs, const Strategy& strategy)
    : spec_(spec), strategy_(strategy) {
  if (spec.n_steps < 1) throw Error(ErrorCode::InvalidArgument, "lattice needs n_steps >= 1");
  if (!(spec.horizon > 0.0) || !std::isfinite(spec.horizon)) {
    throw Error(ErrorCode::InvalidArgument, "lattice horizon must be positive and finite");
  }
  if (!(spec.up_prob > 0.0 && spec.up_prob < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "up_prob must lie in (0,1)");
  }
  if (!(spec.initial_wealth > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "initial wealth must be positive");
  }
  dt_ = spec.horizon / spec.n_steps;
  const double p = spec.up_prob;
  const double spread = strategy.pi * market.sigma * std::sqrt(dt_ / (p * (1.0 - p)));
  double mean = (market.r + strategy.pi * (market.mu - market.r) - strategy.xi -
                 0.5 * strategy.pi * strategy.pi * market.sigma * market.sigma) *
                dt_;
  if (spec.calibration == Calibration::PowerMoment) {
    const double kappa = 1.0 - prefs.R;
    const double m = p * std::exp(kappa * (1.0 - p) * spread) + (1.0 - p) * std::exp(-kappa * p * spread);
    mean = (-strategy.H * dt_ - std::log(m)) / kappa;
  }
  up_ = mean + (1.0 - p) * spread;
  down_ = mean - p * spread;

  wealth_.resize(size());
  for (int i = 0; i <= spec.n_steps; ++i) {
    for (int j = 0; j <= i; ++j) {
      wealth_[node_offset(i, j)] = spec.initial_wealth * std::exp(j * up_ + (i - j) * down_);
    }
  }
}

double Lattice::brownian(int step, int node) const {
  const double p = spec_.up_prob;
  return (node - step * p) * std::sqrt(dt_ / (p * (1.0 - p)));
}

double Lattice::expectation_from_root(std::span<const double> level_values, int step) const {
  std::vector<double> v(level_values.begin(), level_values.end());
  for (int i = step - 1; i >= 0; --i) {
    for (int j = 0; j <= i; ++j) v[j] = expect(v, j);
  }
  return v.front();
}

AdaptedProcess::AdaptedProcess(int n_steps)
    : n_steps_(n_steps), values_(node_count(n_steps), 0.0), decay_(node_count(n_steps), 0.0) {}

void AdaptedProcess::set(int step, int node, double value, double decay) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << "adapted process value at (" << step << "," << node << ") must be finite and >= 0, got "
        << value;
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
  values_[node_offset(step, node)] = value;
  decay_[node_offset(step, node)] = decay;
}

double AdaptedProcess::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double exp_integral(double rate, double dt) {
  if (rate == 0.0) return dt;
  return std::expm1(rate * dt) / rate;
}

double step_integral(const AdaptedProcess& U, int step, int node, double dt, double power,
                     double weight_rate) {
  const double u = U.value(step, node);
  if (u == 0.0) return 0.0;
  return std::pow(u, power) * exp_integral(weight_rate - power * U.decay(step, node), dt);
}

TailCondition TailCondition::proportional(const Strategy& strategy) {
  if (!(strategy.H > 0.0)) {
    throw Error(ErrorCode::OutsideD, "proportional tail requires H(pi, xi) > 0");
  }
  TailCondition t;
  t.kind = Kind::Proportional;
  t.H = strategy.H;
  return t;
}

TailCondition TailCondition::explicit_values(std::vector<double> W, std::vector<double> J) {
  if (W.size() != J.size()) {
    throw Error(ErrorCode::InvalidArgument, "explicit tail needs matching W and J sizes");
  }
  TailCondition t;
  t.kind = Kind::Explicit;
  t.W_values = std::move(W);
  t.J_values = std::move(J);
  return t;
}

double tail_W(const TailCondition& tail, double u, double source, int node,
              const PreferenceParams& prefs) {
  switch (tail.kind) {
    case TailCondition::Kind::Zero:
      return 0.0;
    case TailCondition::Kind::Explicit:
      return tail.W_values.at(static_cast<std::size_t>(node));
    case TailCondition::Kind::Proportional:
      break;
  }
  const double H = tail.H;
  if (source <= 0.0) return u > 0.0 ? std::pow(u / H, prefs.theta) : 0.0;
  if (u <= 0.0) return source / H;
  // x = w^{1/theta} solves x^{theta-1} (H x - u) = source, increasing for x > u/H.
  double lo = u / H;
  double hi = lo + std::pow(source / H, 1.0 / prefs.theta);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (std::pow(mid, prefs.theta - 1.0) * (H * mid - u) < source) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::pow(0.5 * (lo + hi), prefs.theta);
}

double tail_J(const TailCondition& tail, double u, double t, int node,
              const PreferenceParams& prefs, double weight_rate) {
  switch (tail.kind) {
    case TailCondition::Kind::Zero:
      return 0.0;
    case TailCondition::Kind::Explicit:
      if (weight_rate != 0.0) {
        throw Error(ErrorCode::InvalidArgument, "explicit tails carry unweighted J only");
      }
      return tail.J_values.at(static_cast<std::size_t>(node));
    case TailCondition::Kind::Proportional:
      break;
  }
  if (!(weight_rate < tail.H)) {
    throw Error(ErrorCode::NotSelfOrder, "weighted tail integral diverges (weight rate >= H)");
  }
  if (u == 0.0) return 0.0;
  return std::exp(weight_rate * t) * std::pow(u, prefs.theta) / (tail.H - weight_rate);
}

double backward_step(double xi, double step_integral, const PreferenceParams& prefs) {
  return std::pow(std::pow(xi, 1.0 / prefs.theta) + step_integral / prefs.theta, prefs.theta);
}

double forward_step(double w, double step_integral, const PreferenceParams& prefs) {
  const double root = std::pow(w, 1.0 / prefs.theta) - step_integral / prefs.theta;
  return root > 0.0 ? std::pow(root, prefs.theta) : 0.0;
}

Lattice build_lattice(const LatticeSpec& spec, const MarketParams& market,
                      const PreferenceParams& prefs, const Strategy& strategy) {
  return Lattice(spec, market, prefs, strategy);
}

AdaptedProcess proportional_consumption(const Lattice& lattice, const PreferenceParams& prefs) {
  const Strategy& s = lattice.strategy();
  const double decay = s.H / prefs.theta;
  AdaptedProcess U(lattice.n_steps());
  for (int i = 0; i <= lattice.n_steps(); ++i) {
    for (int j = 0; j <= i; ++j) {
      U.set(i, j, prefs.theta * std::pow(s.xi * lattice.wealth(i, j), 1.0 - prefs.S), decay);
    }
  }
  return U;
}

AdaptedProcess solve_backward(const AdaptedProcess& U, const TailCondition& tail,
                              const Lattice& lattice, const PreferenceParams& prefs) {
  const int n = lattice.n_steps();
  AdaptedProcess W(n);
  for (int j = 0; j <= n; ++j) W.set(n, j, tail_W(tail, U.value(n, j), 0.0, j, prefs));
  for (int i = n - 1; i >= 0; --i) {
    const auto next = W.level(i + 1);
    for (int j = 0; j <= i; ++j) {
      const double xi = lattice.expect(next, j);
      W.set(i, j, backward_step(xi, step_integral(U, i, j, lattice.dt()), prefs));
    }
  }
  return W;
}

StoppingSpec::StoppingSpec(int n_steps, std::vector<std::uint8_t> started_mask,
                           std::vector<std::uint8_t> stopped_mask)
    : n_steps_(n_steps), started_(std::move(started_mask)), stopped_(std::move(stopped_mask)) {
  if (started_.size() != node_count(n_steps) || stopped_.size() != node_count(n_steps)) {
    throw Error(ErrorCode::InvalidArgument, "stopping masks must cover every lattice node");
  }
  for (int i = 0; i <= n_steps; ++i) {
    for (int j = 0; j <= i; ++j) {
      if (stopped(i, j) && !started(i, j)) {
        throw Error(ErrorCode::InvalidArgument, "stopping spec violates sigma <= tau");
      }
      if (i == n_steps) continue;
      for (int child : {j, j + 1}) {
        if ((started(i, j) && !started(i + 1, child)) || (stopped(i, j) && !stopped(i + 1, child))) {
          throw Error(ErrorCode::InvalidArgument, "stopping sets must be closed under children");
        }
      }
    }
  }
}

StoppingSpec StoppingSpec::from_seeds(int n_steps, std::vector<std::uint8_t> start_seeds,
                                      std::vector<std::uint8_t> stop_seeds) {
  if (start_seeds.size() != node_count(n_steps) || stop_seeds.size() != node_count(n_steps)) {
    throw Error(ErrorCode::InvalidArgument, "seed masks must cover every lattice node");
  }
  for (std::size_t k = 0; k < start_seeds.size(); ++k) start_seeds[k] |= stop_seeds[k];
  for (int i = 0; i < n_steps; ++i) {
    for (int j = 0; j <= i; ++j) {
      const std::size_t at = node_offset(i, j);
      for (int child : {j, j + 1}) {
        start_seeds[node_offset(i + 1, child)] |= start_seeds[at];
        stop_seeds[node_offset(i + 1, child)] |= stop_seeds[at];
      }
    }
  }
  return StoppingSpec(n_steps, std::move(start_seeds), std::move(stop_seeds));
}

StoppingSpec StoppingSpec::deterministic(int n_steps, int sigma_step, std::optional<int> tau_step) {
  if (tau_step && *tau_step < sigma_step) {
    throw Error(ErrorCode::InvalidArgument, "deterministic stopping needs sigma <= tau");
  }
  std::vector<std::uint8_t> started(node_count(n_steps), 0);
  std::vector<std::uint8_t> stopped(node_count(n_steps), 0);
  for (int i = 0; i <= n_steps; ++i) {
    for (int j = 0; j <= i; ++j) {
      started[node_offset(i, j)] = i >= sigma_step;
      stopped[node_offset(i, j)] = tau_step.has_value() && i >= *tau_step;
    }
  }
  return StoppingSpec(n_steps, std::move(started), std::move(stopped));
}

AdaptedProcess indicator_consumption(double gamma, const StoppingSpec& stops,
                                     const Lattice& lattice) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
  if (stops.n_steps() != lattice.n_steps()) {
    throw Error(ErrorCode::InvalidArgument, "stopping spec and lattice disagree on n_steps");
  }
  AdaptedProcess U(lattice.n_steps());
  for (int i = 0; i <= lattice.n_steps(); ++i) {
    const double level = std::exp(-gamma * lattice.time(i));
    for (int j = 0; j <= i; ++j) U.set(i, j, stops.active(i, j) ? level : 0.0, gamma);
  }
  return U;
}

TailCondition indicator_tail(double gamma, const StoppingSpec& stops, const Lattice& lattice,
                             const PreferenceParams& prefs) {
  const int n = lattice.n_steps();
  const double gt = gamma * prefs.theta;
  const double J_level = std::exp(-gt * lattice.time(n)) / gt;
  const double W_level = std::pow(std::exp(-gamma * lattice.time(n)) / gt, prefs.theta);
  std::vector<double> W(n + 1, 0.0), J(n + 1, 0.0);
  for (int j = 0; j <= n; ++j) {
    if (stops.active(n, j)) {
      W[j] = W_level;
      J[j] = J_level;
    }
  }
  return TailCondition::explicit_values(std::move(W), std::move(J));
}

AdaptedProcess appendix_lower_bound(double gamma, const StoppingSpec& stops,
                                    const Lattice& lattice, const PreferenceParams& prefs) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
  const int n = lattice.n_steps();
  // start_disc = E_t[e^{-gamma (t v sigma)}], stop_disc likewise for tau.
  std::vector<double> start_disc(n + 1), stop_disc(n + 1);
  AdaptedProcess bound(n);
  const auto emit = [&](int i) {
    for (int j = 0; j <= i; ++j) {
      const double gap = std::max(start_disc[j] - stop_disc[j], 0.0);
      bound.set(i, j, std::pow(gap / (gamma * prefs.theta), prefs.theta));
    }
  };
  for (int j = 0; j <= n; ++j) {
    const double level = std::exp(-gamma * lattice.time(n));
    start_disc[j] = stops.started(n, j) ? level : 0.0;
    stop_disc[j] = stops.stopped(n, j) ? level : 0.0;
  }
  emit(n);
  for (int i = n - 1; i >= 0; --i) {
    const double level = std::exp(-gamma * lattice.time(i));
    for (int j = 0; j <= i; ++j) {
      start_disc[j] = stops.started(i, j) ? level : lattice.expect(start_disc, j);
      stop_disc[j] = stops.stopped(i, j) ? level : lattice.expect(stop_disc, j);
    }
    emit(i);
  }
  return bound;
}

}  // namespace ezsdu

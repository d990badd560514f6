#include "ezsdu/fixed_point.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "ezsdu/error.hpp"

namespace ezsdu {

namespace {

// Inputs of the aggregator over one step, as functions of x = s - t_i:
// consumption max(u0 e^{-u_rate x}, floor0 e^{floor_rate x}) and an
// additive source src0 e^{src_rate x}.
struct StepDriver {
  double u0 = 0.0;
  double u_rate = 0.0;
  double floor0 = 0.0;
  double floor_rate = 0.0;
  double src0 = 0.0;
  double src_rate = 0.0;

  double consumption(double x) const {
    const double base = u0 * std::exp(-u_rate * x);
    return floor0 > 0.0 ? std::max(base, floor0 * std::exp(floor_rate * x)) : base;
  }
  double source(double x) const { return src0 > 0.0 ? src0 * std::exp(src_rate * x) : 0.0; }
  bool closed_form() const { return floor0 == 0.0 && src0 == 0.0; }
  double consumption_integral(double dt) const { return u0 * exp_integral(-u_rate, dt); }
};

double aggregator(const StepDriver& d, double x, double w, double rho) {
  return d.consumption(x) * std::pow(std::max(w, 0.0), rho) + d.source(x);
}

// W at the left node given xi at the right node.
double integrate_backward(const StepDriver& d, double xi, double dt, const PreferenceParams& prefs,
                          int substeps) {
  if (d.closed_form()) return backward_step(xi, d.consumption_integral(dt), prefs);
  const double h = dt / substeps;
  double w = xi;
  double x = dt;
  for (int k = 0; k < substeps; ++k) {
    // dw/dtau = aggregator(x = dt - tau, w)
    const double k1 = aggregator(d, x, w, prefs.rho);
    const double k2 = aggregator(d, x - 0.5 * h, w + 0.5 * h * k1, prefs.rho);
    const double k3 = aggregator(d, x - 0.5 * h, w + 0.5 * h * k2, prefs.rho);
    const double k4 = aggregator(d, x - h, w + h * k3, prefs.rho);
    w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    x -= h;
  }
  return w;
}

// Integral of the aggregator over the step along the path started at w0
// on the left node.
double step_contribution(const StepDriver& d, double w0, double dt, const PreferenceParams& prefs,
                         int substeps) {
  if (d.closed_form()) return w0 - forward_step(w0, d.consumption_integral(dt), prefs);
  const double h = dt / substeps;
  double w = w0;
  double x = 0.0;
  for (int k = 0; k < substeps; ++k) {
    const double k1 = aggregator(d, x, w, prefs.rho);
    const double k2 = aggregator(d, x + 0.5 * h, w - 0.5 * h * k1, prefs.rho);
    const double k3 = aggregator(d, x + 0.5 * h, w - 0.5 * h * k2, prefs.rho);
    const double k4 = aggregator(d, x + h, w - h * k3, prefs.rho);
    w -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    x += h;
  }
  return w0 - w;
}

const AdaptedProcess& dominating(const PerturbationSpec& p, const AdaptedProcess& U) {
  return p.Lambda ? *p.Lambda : U;
}

StepDriver perturbed_driver(const AdaptedProcess& U, const PerturbationSpec& p, int i, int j,
                            double t, const PreferenceParams& prefs) {
  StepDriver d;
  d.u0 = U.value(i, j);
  d.u_rate = U.decay(i, j);
  if (p.epsilon > 0.0) {
    const AdaptedProcess& L = dominating(p, U);
    d.src0 = p.epsilon * std::exp(p.nu * t) * std::pow(L.value(i, j), prefs.theta);
    d.src_rate = p.nu - prefs.theta * L.decay(i, j);
  }
  return d;
}

double terminal_source(const AdaptedProcess& U, const PerturbationSpec& p, int j, double t,
                       const PreferenceParams& prefs) {
  if (!(p.epsilon > 0.0)) return 0.0;
  const AdaptedProcess& L = dominating(p, U);
  return p.epsilon * std::exp(p.nu * t) * std::pow(L.value(L.n_steps(), j), prefs.theta);
}

void require_same_shape(const AdaptedProcess& a, const Lattice& lattice, const char* what) {
  if (a.n_steps() != lattice.n_steps()) {
    std::ostringstream msg;
    msg << what << " has " << a.n_steps() << " steps, lattice has " << lattice.n_steps();
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
}

double relative_sup_gap(const AdaptedProcess& a, const AdaptedProcess& b) {
  double gap = 0.0;
  const auto va = a.values();
  const auto vb = b.values();
  for (std::size_t k = 0; k < va.size(); ++k) {
    const double scale = std::max(va[k], vb[k]);
    if (scale > 0.0) gap = std::max(gap, std::abs(va[k] - vb[k]) / scale);
  }
  return gap;
}

double positive_root(double slope, double eps, const PreferenceParams& prefs) {
  const double base = std::pow(slope, -prefs.theta);
  if (eps == 0.0) return base;
  // g(x) = slope x - x^rho - eps is convex with g(0) < 0: one positive root.
  double lo = base;
  double hi = std::pow(1.0 + eps * std::pow(slope, prefs.theta - 1.0), prefs.theta) * base;
  for (int it = 0; it < 2000 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (slope * mid - std::pow(mid, prefs.rho) - eps < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

AdaptedProcess compute_J(const AdaptedProcess& U, const TailCondition& tail, const Lattice& lattice,
                         const PreferenceParams& prefs, double weight_rate) {
  require_same_shape(U, lattice, "U");
  const int n = lattice.n_steps();
  AdaptedProcess J(n);
  for (int j = 0; j <= n; ++j) {
    J.set(n, j, tail_J(tail, U.value(n, j), lattice.time(n), j, prefs, weight_rate));
  }
  for (int i = n - 1; i >= 0; --i) {
    const auto next = J.level(i + 1);
    const double weight = std::exp(weight_rate * lattice.time(i));
    for (int j = 0; j <= i; ++j) {
      const double increment =
          weight * step_integral(U, i, j, lattice.dt(), prefs.theta, weight_rate);
      J.set(i, j, increment + lattice.expect(next, j));
    }
  }
  return J;
}

SelfOrderConstants self_order_constants(const AdaptedProcess& U, const AdaptedProcess& J,
                                        const Lattice& lattice, const PreferenceParams& prefs,
                                        double weight_rate) {
  SelfOrderConstants c{std::numeric_limits<double>::infinity(), 0.0};
  bool any = false;
  for (int i = 0; i <= lattice.n_steps(); ++i) {
    const double weight = std::exp(weight_rate * lattice.time(i));
    for (int j = 0; j <= i; ++j) {
      const double x = weight * std::pow(U.value(i, j), prefs.theta);
      const double y = J.value(i, j);
      if (y <= 0.0) {
        if (x > 0.0) {
          std::ostringstream msg;
          msg << "J vanishes at node (" << i << "," << j << ") while U is positive";
          throw Error(ErrorCode::NotSelfOrder, msg.str());
        }
        continue;
      }
      if (x <= 0.0) {
        std::ostringstream msg;
        msg << "U vanishes at node (" << i << "," << j << ") while J > 0";
        throw Error(ErrorCode::NotSelfOrder, msg.str());
      }
      const double ratio = x / y;
      c.k = std::min(c.k, ratio);
      c.K = std::max(c.K, ratio);
      any = true;
    }
  }
  if (!any) throw Error(ErrorCode::NotSelfOrder, "J vanishes identically");
  return c;
}

OrderRoots solve_AB(double k, double K, double eps_low, double eps_high,
                    const PreferenceParams& prefs) {
  if (!(k > 0.0) || !(K >= k) || !std::isfinite(K)) {
    throw Error(ErrorCode::InvalidArgument, "solve_AB needs 0 < k <= K < inf");
  }
  if (!(eps_low >= 0.0) || !(eps_high >= eps_low) || !std::isfinite(eps_high)) {
    throw Error(ErrorCode::InvalidArgument, "solve_AB needs 0 <= eps_low <= eps_high < inf");
  }
  return OrderRoots{positive_root(K, eps_low, prefs), positive_root(k, eps_high, prefs)};
}

PicardResult picard_solve(const AdaptedProcess& U, const PerturbationSpec& perturbation,
                          const TailCondition& tail, const Lattice& lattice,
                          const PreferenceParams& prefs, const PicardOptions& options) {
  require_same_shape(U, lattice, "U");
  if (perturbation.Lambda) require_same_shape(*perturbation.Lambda, lattice, "Lambda");
  if (!(perturbation.epsilon >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon must be >= 0");
  }
  const int n = lattice.n_steps();
  const double dt = lattice.dt();

  PicardResult result;
  OrderCertificate& cert = result.certificate;
  cert.J = compute_J(U, tail, lattice, prefs);

  const bool no_source =
      perturbation.epsilon == 0.0 || dominating(perturbation, U).max_value() == 0.0;
  if (U.max_value() == 0.0 && no_source) {
    result.W = AdaptedProcess(n);
    cert.lower = AdaptedProcess(n);
    cert.upper = AdaptedProcess(n);
    cert.contained = true;
    result.iterations = 1;
    result.gaps.push_back(0.0);
    return result;
  }

  SelfOrderConstants so;
  try {
    so = self_order_constants(U, cert.J, lattice, prefs);
  } catch (const Error& e) {
    throw Error(ErrorCode::NoContraction, std::string("no order certificate: ") + e.what());
  }

  // Source relative to the increments of J, and to U^theta on the horizon.
  double eps_low = 0.0;
  double eps_high = 0.0;
  if (perturbation.epsilon > 0.0) {
    eps_low = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= i; ++j) {
        double src = 0.0;
        double base = 0.0;
        if (i == n) {
          src = terminal_source(U, perturbation, j, lattice.time(n), prefs);
          base = std::pow(U.value(i, j), prefs.theta);
        } else {
          const StepDriver d = perturbed_driver(U, perturbation, i, j, lattice.time(i), prefs);
          src = d.src0 * exp_integral(d.src_rate, dt);
          base = step_integral(U, i, j, dt, prefs.theta);
        }
        if (base <= 0.0) {
          if (src > 0.0) {
            throw Error(ErrorCode::NoContraction, "perturbation source not dominated by U^theta");
          }
          continue;
        }
        eps_low = std::min(eps_low, src / base);
        eps_high = std::max(eps_high, src / base);
      }
    }
  }
  const OrderRoots roots = solve_AB(so.k, so.K, eps_low, eps_high, prefs);
  cert.k = so.k;
  cert.K = so.K;
  cert.A = roots.A;
  cert.B = roots.B;
  cert.eps_low = eps_low;
  cert.eps_high = eps_high;

  AdaptedProcess W(n);
  if (options.initial) {
    require_same_shape(*options.initial, lattice, "initial iterate");
    W = *options.initial;
  } else {
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= i; ++j) W.set(i, j, cert.B * std::pow(U.value(i, j), prefs.theta));
    }
  }

  std::vector<StepDriver> drivers(node_count(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      drivers[node_offset(i, j)] = perturbed_driver(U, perturbation, i, j, lattice.time(i), prefs);
    }
  }

  AdaptedProcess next(n);
  for (int m = 0; m < options.max_iter; ++m) {
    for (int j = 0; j <= n; ++j) {
      const double src = terminal_source(U, perturbation, j, lattice.time(n), prefs);
      next.set(n, j, tail_W(tail, U.value(n, j), src, j, prefs));
    }
    for (int i = n - 1; i >= 0; --i) {
      const auto ahead = next.level(i + 1);
      for (int j = 0; j <= i; ++j) {
        const double own = step_contribution(drivers[node_offset(i, j)], W.value(i, j), dt, prefs,
                                             options.substeps);
        next.set(i, j, own + lattice.expect(ahead, j));
      }
    }
    const double gap = relative_sup_gap(next, W);
    result.gaps.push_back(gap);
    std::swap(W, next);
    if (gap < options.tol) {
      result.iterations = m + 1;
      result.W = std::move(W);
      cert.lower = AdaptedProcess(n);
      cert.upper = AdaptedProcess(n);
      constexpr double slack = 1e-8;
      cert.contained = true;
      for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= i; ++j) {
          const double lo = so.k * roots.A * cert.J.value(i, j);
          const double hi = so.K * roots.B * cert.J.value(i, j);
          cert.lower.set(i, j, lo);
          cert.upper.set(i, j, hi);
          const double w = result.W.value(i, j);
          if (w < lo * (1.0 - slack) || w > hi * (1.0 + slack)) cert.contained = false;
        }
      }
      return result;
    }
  }
  std::ostringstream msg;
  msg << "Picard iteration did not reach tol=" << options.tol << " in " << options.max_iter
      << " iterations (last gap " << result.gaps.back() << ")";
  throw Error(ErrorCode::MaxIterExceeded, msg.str());
}

AdaptedProcess solve_perturbed(const AdaptedProcess& U, const PerturbationSpec& perturbation,
                               const TailCondition& tail, const Lattice& lattice,
                               const PreferenceParams& prefs, int substeps) {
  require_same_shape(U, lattice, "U");
  if (perturbation.Lambda) require_same_shape(*perturbation.Lambda, lattice, "Lambda");
  const int n = lattice.n_steps();
  AdaptedProcess W(n);
  for (int j = 0; j <= n; ++j) {
    const double src = terminal_source(U, perturbation, j, lattice.time(n), prefs);
    W.set(n, j, tail_W(tail, U.value(n, j), src, j, prefs));
  }
  for (int i = n - 1; i >= 0; --i) {
    const auto next = W.level(i + 1);
    for (int j = 0; j <= i; ++j) {
      const StepDriver d = perturbed_driver(U, perturbation, i, j, lattice.time(i), prefs);
      W.set(i, j, integrate_backward(d, lattice.expect(next, j), lattice.dt(), prefs, substeps));
    }
  }
  return W;
}

double default_nu(const AdaptedProcess& Lambda, const Lattice& lattice,
                  const PreferenceParams& prefs) {
  const Strategy& s = lattice.strategy();
  if (!(s.H > 0.0)) throw Error(ErrorCode::NotSelfOrder, "lattice strategy has H <= 0");
  const TailCondition tail = TailCondition::proportional(s);
  for (double fraction : {0.9, 0.75, 0.5, 0.25, 0.1}) {
    const double nu = fraction * s.H / prefs.theta;
    const double weight = nu * prefs.theta;
    try {
      const AdaptedProcess J = compute_J(Lambda, tail, lattice, prefs, weight);
      const SelfOrderConstants c = self_order_constants(Lambda, J, lattice, prefs, weight);
      if (c.k > 0.0 && std::isfinite(c.K)) return nu;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotSelfOrder) throw;
    }
  }
  throw Error(ErrorCode::NotSelfOrder, "no exponential weight keeps Lambda^theta self-order");
}

ExtremalResult extremal_solve(const AdaptedProcess& U, const AdaptedProcess& Lambda,
                              std::optional<double> nu, const TailCondition& tail,
                              const Lattice& lattice, const PreferenceParams& prefs,
                              const ExtremalOptions& options) {
  require_same_shape(U, lattice, "U");
  require_same_shape(Lambda, lattice, "Lambda");
  const int n = lattice.n_steps();
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= i; ++j) {
      if (U.value(i, j) > Lambda.value(i, j) * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "U exceeds Lambda at node (" << i << "," << j << ")";
        throw Error(ErrorCode::NotDominated, msg.str());
      }
    }
  }

  ExtremalResult result;
  result.nu = nu ? *nu : default_nu(Lambda, lattice, prefs);
  if (!(result.nu > 0.0)) throw Error(ErrorCode::InvalidArgument, "nu must be > 0");

  std::vector<double> eps = options.eps_sequence;
  if (eps.empty()) {
    for (int k = 1; k <= 20; ++k) eps.push_back(std::ldexp(1.0, -k));
  }
  const double nu_theta = result.nu * prefs.theta;

  std::optional<AdaptedProcess> previous;
  for (std::size_t level = 0; level < eps.size(); ++level) {
    const double e = eps[level];
    if (!(e > 0.0) || (level > 0 && e > eps[level - 1])) {
      throw Error(ErrorCode::InvalidArgument, "eps sequence must be positive and decreasing");
    }
    const double inv_n = 1.0 / static_cast<double>(level + 1);
    AdaptedProcess W(n);
    for (int j = 0; j <= n; ++j) {
      const double t = lattice.time(n);
      const double lam = Lambda.value(n, j);
      const double u = std::max(U.value(n, j), inv_n * std::exp(result.nu * t) * lam);
      W.set(n, j, tail_W(tail, u, e * std::exp(nu_theta * t) * std::pow(lam, prefs.theta), j, prefs));
    }
    for (int i = n - 1; i >= 0; --i) {
      const auto next = W.level(i + 1);
      const double t = lattice.time(i);
      for (int j = 0; j <= i; ++j) {
        const double lam = Lambda.value(i, j);
        StepDriver d;
        d.u0 = U.value(i, j);
        d.u_rate = U.decay(i, j);
        d.floor0 = inv_n * std::exp(result.nu * t) * lam;
        d.floor_rate = result.nu - Lambda.decay(i, j);
        d.src0 = e * std::exp(nu_theta * t) * std::pow(lam, prefs.theta);
        d.src_rate = nu_theta - prefs.theta * Lambda.decay(i, j);
        W.set(i, j, integrate_backward(d, lattice.expect(next, j), lattice.dt(), prefs,
                                       options.substeps));
      }
    }
    result.levels = static_cast<int>(level + 1);
    if (previous) {
      result.last_gap = relative_sup_gap(W, *previous);
      if (result.last_gap < options.tol) {
        result.converged = true;
        result.W = std::move(W);
        return result;
      }
    }
    previous = std::move(W);
  }
  result.W = std::move(*previous);
  return result;
}

}  // namespace ezsdu

#include "ezsdu/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ezsdu/error.hpp"

namespace ezsdu {

namespace {

void require_domain(const Strategy& s) {
  if (!s.in_domain()) {
    std::ostringstream msg;
    msg << "strategy (pi=" << s.pi << ", xi=" << s.xi << ") has H=" << s.H
        << "; membership in D needs xi > 0 and H > 0";
    throw Error(ErrorCode::OutsideD, msg.str());
  }
}

}  // namespace

ImproperFamilyMember::ImproperFamilyMember(double A0, const Strategy& strategy,
                                           const PreferenceParams& prefs)
    : A0_(A0), strategy_(strategy), theta_(prefs.theta), rho_(prefs.rho),
      T_(AbsorptionTime::never()) {
  require_domain(strategy);
  const double a_const = constant_member_A0(strategy, prefs);
  if (!(A0 >= 0.0) || !std::isfinite(A0)) {
    throw Error(ErrorCode::InvalidArgument, "A0 must be a finite nonnegative number");
  }
  if (A0 > a_const * (1.0 + 1e-14)) {
    std::ostringstream msg;
    msg << "A0=" << A0 << " exceeds (theta/H)^theta=" << a_const
        << "; the profile diverges and E[V_t] does not vanish";
    throw Error(ErrorCode::DivergentFamily, msg.str());
  }
  const double H = strategy.H;
  const double gap = theta_ - H * std::pow(A0, 1.0 / theta_);
  if (A0 >= a_const || gap <= 0.0) {
    A0_ = a_const;
    T_ = AbsorptionTime::never();
  } else {
    T_ = AbsorptionTime::at(theta_ / H * std::log(theta_ / gap));
  }
}

double ImproperFamilyMember::operator()(double t) const {
  if (!T_.is_finite()) return A0_;
  if (t >= T_.value()) return 0.0;
  const double H = strategy_.H;
  const double gap = theta_ - H * std::pow(A0_, 1.0 / theta_);
  const double base = (theta_ - gap * std::exp(H * t / theta_)) / H;
  return base > 0.0 ? std::pow(base, theta_) : 0.0;
}

double ImproperFamilyMember::drift(double a) const {
  return strategy_.H * a - theta_ * std::pow(std::max(a, 0.0), rho_);
}

double candidate_value(double x, const MarketParams& market, const PreferenceParams& prefs) {
  if (!(market.eta > 0.0)) throw Error(ErrorCode::IllPosed, "eta <= 0");
  if (!(x > 0.0)) throw Error(ErrorCode::InvalidArgument, "wealth must be positive");
  return std::pow(market.eta, -prefs.theta * prefs.S) * std::pow(x, 1.0 - prefs.R) /
         (1.0 - prefs.R);
}

ProportionalSolution proportional_h(const Strategy& strategy, const PreferenceParams& prefs) {
  require_domain(strategy);
  ProportionalSolution sol;
  sol.strategy = strategy;
  sol.h_value = std::pow(strategy.xi, 1.0 - prefs.R) / (1.0 - prefs.R) *
                std::pow(prefs.theta / strategy.H, prefs.theta);
  sol.J_coefficient = 1.0 / strategy.H;
  return sol;
}

Strategy optimal_strategy(const MarketParams& market, const PreferenceParams& prefs) {
  if (!(market.eta > 0.0)) throw Error(ErrorCode::IllPosed, "eta <= 0");
  return make_strategy(market.lambda / (market.sigma * prefs.R), market.eta, market, prefs);
}

double constant_member_A0(const Strategy& strategy, const PreferenceParams& prefs) {
  require_domain(strategy);
  return std::pow(prefs.theta / strategy.H, prefs.theta);
}

ImproperFamilyMember family_member(double A0, const Strategy& strategy,
                                   const PreferenceParams& prefs) {
  return ImproperFamilyMember(A0, strategy, prefs);
}

ImproperFamilyMember family_member_absorbed_at(AbsorptionTime T, const Strategy& strategy,
                                               const PreferenceParams& prefs) {
  require_domain(strategy);
  if (!T.is_finite()) return ImproperFamilyMember(constant_member_A0(strategy, prefs), strategy, prefs);
  if (!(T.value() >= 0.0)) throw Error(ErrorCode::InvalidArgument, "absorption time must be >= 0");
  const double scale = prefs.theta / strategy.H;
  const double a = scale * -std::expm1(-strategy.H * T.value() / prefs.theta);
  return ImproperFamilyMember(std::pow(a, prefs.theta), strategy, prefs);
}

double default_fd_step(const Strategy& strategy, const PreferenceParams& prefs) {
  require_domain(strategy);
  return 1e-4 * prefs.theta / strategy.H;
}

double ode_defect(const ImproperFamilyMember& member, double t, double dt) {
  // The stencil stays on one side of the absorption kink and never reaches
  // before the origin.
  const auto forward = [&] {
    return (-3.0 * member(t) + 4.0 * member(t + dt) - member(t + 2.0 * dt)) / (2.0 * dt);
  };
  const auto backward = [&] {
    return (3.0 * member(t) - 4.0 * member(t - dt) + member(t - 2.0 * dt)) / (2.0 * dt);
  };
  double derivative = 0.0;
  const AbsorptionTime T = member.T();
  if (T.is_finite() && std::abs(t - T.value()) < 2.0 * dt) {
    derivative = t >= T.value() ? forward() : backward();
  } else if (t - dt < 0.0) {
    derivative = forward();
  } else {
    derivative = (member(t + dt) - member(t - dt)) / (2.0 * dt);
  }
  return std::abs(derivative - member.drift(member(t)));
}

double ode_residual(const ImproperFamilyMember& member, std::span<const double> t_grid,
                    double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be > 0");
  double worst = 0.0;
  for (double t : t_grid) worst = std::max(worst, ode_defect(member, t, dt));
  return worst;
}

}  // namespace ezsdu

#pragma once

#include <span>

#include "ezsdu/params.hpp"

namespace ezsdu {

/// Closed-form utility of a constant proportional strategy:
/// V_t = h X_t^{1-R} with h = xi^{1-R}/(1-R) (theta/H)^theta, and
/// J_t = E_t[int_t^inf C_s^{1-R} ds] = C_t^{1-R}/H.
struct ProportionalSolution {
  Strategy strategy;
  double h_value = 0.0;
  double J_coefficient = 0.0;
};

/// Time at which a member of the improper family is absorbed at zero.
/// Never() is the proper member; it is not encoded as a large float.
class AbsorptionTime {
 public:
  static AbsorptionTime never() { return AbsorptionTime(); }
  static AbsorptionTime at(double t) { return AbsorptionTime(t); }

  bool is_finite() const { return finite_; }
  /// Only meaningful when is_finite().
  double value() const { return value_; }
  bool after(double t) const { return !finite_ || value_ > t; }

 private:
  AbsorptionTime() = default;
  explicit AbsorptionTime(double t) : finite_(true), value_(t) {}

  bool finite_ = false;
  double value_ = 0.0;
};

/// A(t) solving A' = H A - theta A^rho, started at A0 and absorbed at zero.
/// V_t = A(t) xi^{1-R} X_t^{1-R} / (1-R) is then a utility process.
class ImproperFamilyMember {
 public:
  ImproperFamilyMember(double A0, const Strategy& strategy, const PreferenceParams& prefs);

  double A0() const { return A0_; }
  AbsorptionTime T() const { return T_; }
  const Strategy& strategy() const { return strategy_; }
  double theta() const { return theta_; }
  double rho() const { return rho_; }

  /// A(t) for t >= 0; zero from T on. Negative t evaluates the smooth
  /// branch, which finite-difference stencils at t = 0 rely on.
  double operator()(double t) const;
  /// Right-hand side of the ODE, H a - theta a^rho.
  double drift(double a) const;

 private:
  double A0_;
  Strategy strategy_;
  double theta_;
  double rho_;
  AbsorptionTime T_;
};

/// V-hat(x) = eta^{-theta S} x^{1-R}/(1-R). Throws IllPosed if eta <= 0.
double candidate_value(double x, const MarketParams& market, const PreferenceParams& prefs);

/// Throws OutsideD when H(pi, xi) <= 0 or xi <= 0.
ProportionalSolution proportional_h(const Strategy& strategy, const PreferenceParams& prefs);

/// (lambda/(sigma R), eta), the maximiser of h over D.
Strategy optimal_strategy(const MarketParams& market, const PreferenceParams& prefs);

/// (theta/H)^theta, the constant (proper) member.
double constant_member_A0(const Strategy& strategy, const PreferenceParams& prefs);

/// Member indexed by A(0). Throws DivergentFamily when A0 > (theta/H)^theta
/// and OutsideD when the strategy is not in D.
ImproperFamilyMember family_member(double A0, const Strategy& strategy,
                                   const PreferenceParams& prefs);

/// Member indexed by its absorption time, A0 = ((theta/H)(1 - e^{-HT/theta}))^theta.
ImproperFamilyMember family_member_absorbed_at(AbsorptionTime T, const Strategy& strategy,
                                               const PreferenceParams& prefs);

/// Default finite-difference step 1e-4 theta/H.
double default_fd_step(const Strategy& strategy, const PreferenceParams& prefs);

/// |A'(t) - (H A - theta A^rho)| at t, with A' by central differences,
/// second-order one-sided when the stencil would cross t = 0 or T.
double ode_defect(const ImproperFamilyMember& member, double t, double dt);

/// Max of ode_defect over the grid.
double ode_residual(const ImproperFamilyMember& member, std::span<const double> t_grid,
                    double dt);

}  // namespace ezsdu

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ezsdu/closed_form.hpp"
#include "ezsdu/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ezsdu;
namespace fz = oracle::frozen;

namespace {

double h_of(double pi, double xi, const fixture::Setup& s) {
  const Strategy st = make_strategy(pi, xi, s.market, s.prefs);
  if (!st.in_domain()) return -INFINITY;
  return proportional_h(st, s.prefs).h_value;
}

}  // namespace

TEST(CandidateValue, FrozenAndScaling) {
  const auto s = fixture::baseline();
  EXPECT_NEAR(candidate_value(1.0, s.market, s.prefs) / fz::baseline_V_hat, 1.0, 1e-13);
  EXPECT_NEAR(candidate_value(2.0, s.market, s.prefs) / candidate_value(1.0, s.market, s.prefs),
              std::pow(2.0, 1.0 - s.prefs.R), 1e-14);
  const auto q = fixture::r_below_one();
  EXPECT_NEAR(candidate_value(1.0, q.market, q.prefs) / fz::low_V_hat, 1.0, 1e-13);
}

TEST(CandidateValue, EqualsHAtOptimum) {
  for (const auto& s : {fixture::baseline(), fixture::r_below_one()}) {
    const double h = proportional_h(s.opt, s.prefs).h_value;
    EXPECT_NEAR(h / candidate_value(1.0, s.market, s.prefs), 1.0, 1e-12);
  }
}

TEST(ProportionalH, FrozenAndDomain) {
  const auto s = fixture::baseline();
  const Strategy st = make_strategy(0.375, 0.01, s.market, s.prefs);
  const auto sol = proportional_h(st, s.prefs);
  EXPECT_NEAR(sol.h_value / -1638400.0, 1.0, 1e-13);
  EXPECT_NEAR(sol.J_coefficient, 1.0 / 0.015625, 1e-9);
  // sign and the ratio identity
  EXPECT_LT(sol.h_value, 0.0);
  EXPECT_NEAR((1.0 - s.prefs.R) * sol.h_value * std::pow(st.xi, s.prefs.R - 1.0),
              std::pow(s.prefs.theta / st.H, s.prefs.theta), 1e-6);
  try {
    proportional_h(make_strategy(0.375, 0.05, s.market, s.prefs), s.prefs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutsideD);
  }
}

TEST(OptimalStrategy, BothSets) {
  const auto s = fixture::baseline();
  EXPECT_NEAR(s.opt.pi, fz::baseline_pi, 1e-15);
  EXPECT_NEAR(s.opt.xi / fz::baseline_eta, 1.0, 1e-14);
  const auto q = fixture::r_below_one();
  EXPECT_NEAR(q.opt.pi, fz::low_pi, 1e-15);
  EXPECT_NEAR(q.opt.xi / fz::low_eta, 1.0, 1e-14);
  EXPECT_GT(proportional_h(q.opt, q.prefs).h_value, 0.0);
}

TEST(OptimalStrategy, CoarseGridAgrees) {
  for (const auto& s : {fixture::baseline(), fixture::r_below_one()}) {
    const auto best = oracle::grid_max([&](double p, double x) { return h_of(p, x, s); },
                                       s.opt.pi - 0.05, s.opt.pi + 0.05, 1e-3,
                                       std::max(1e-4, s.opt.xi - 0.005), s.opt.xi + 0.005, 1e-4);
    EXPECT_LE(std::abs(best.x - s.opt.pi), 1e-3);
    EXPECT_LE(std::abs(best.y - s.opt.xi), 1e-4);
  }
}

TEST(OptimalStrategy, HBelowOptimumOnD) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& s : {fixture::baseline(), fixture::r_below_one()}) {
    const double best = proportional_h(s.opt, s.prefs).h_value;
    int tested = 0;
    while (tested < 1000) {
      const double pi = -1.0 + 3.0 * u(rng);
      const double xi = 1e-4 + 0.1 * u(rng);
      const Strategy st = make_strategy(pi, xi, s.market, s.prefs);
      if (!st.in_domain()) continue;
      EXPECT_LE(proportional_h(st, s.prefs).h_value, best * (1.0 + (best > 0 ? 1e-14 : -1e-14)));
      ++tested;
    }
  }
}

TEST(OptimalStrategy, IllPosedGate) {
  MarketParams m;
  m.eta = -0.01;
  EXPECT_THROW(optimal_strategy(m, derive_preferences(2.0, 1.5)), Error);
  EXPECT_THROW(candidate_value(1.0, m, derive_preferences(2.0, 1.5)), Error);
}

TEST(FamilyMember, ConstantAndZero) {
  const auto s = fixture::baseline();
  const double Ac = constant_member_A0(s.opt, s.prefs);
  EXPECT_NEAR(Ac / fz::baseline_A_const, 1.0, 1e-13);
  const auto c = family_member(Ac, s.opt, s.prefs);
  EXPECT_FALSE(c.T().is_finite());
  for (double t : {0.0, 10.0, 1e4}) EXPECT_DOUBLE_EQ(c(t), Ac);
  const auto z = family_member(0.0, s.opt, s.prefs);
  ASSERT_TRUE(z.T().is_finite());
  EXPECT_EQ(z.T().value(), 0.0);
  EXPECT_EQ(z(0.0), 0.0);
  EXPECT_EQ(z(5.0), 0.0);
}

TEST(FamilyMember, HalfMemberAbsorption) {
  const auto s = fixture::baseline();
  const auto m = family_member(fz::baseline_A0_half, s.opt, s.prefs);
  ASSERT_TRUE(m.T().is_finite());
  EXPECT_NEAR(m.T().value(), fz::baseline_T_half, 1e-9);
  const double T_ode = oracle::absorption_time(s.opt.H, s.prefs.theta, fz::baseline_A0_half,
                                               1e-3, 1e4);
  EXPECT_NEAR(m.T().value(), T_ode, 1e-4 * s.prefs.theta / s.opt.H);
  // profile against direct integration at a few times
  const auto f = [&](double, double a) {
    return s.opt.H * a - s.prefs.theta * std::pow(std::max(a, 0.0), s.prefs.rho);
  };
  for (double t : {10.0, 40.0, 70.0}) {
    const double a = oracle::rk4(f, fz::baseline_A0_half, 0.0, t, 20000);
    EXPECT_NEAR(m(t) / a, 1.0, 1e-9);
  }
}

TEST(FamilyMember, Divergent) {
  const auto s = fixture::baseline();
  try {
    family_member(1.01 * fz::baseline_A_const, s.opt, s.prefs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivergentFamily);
  }
}

TEST(FamilyMember, InverseRoundTrip) {
  const auto s = fixture::baseline();
  for (double T : {0.5, 5.0, 81.0, 300.0}) {
    const auto m = family_member_absorbed_at(AbsorptionTime::at(T), s.opt, s.prefs);
    const auto again = family_member(m.A0(), s.opt, s.prefs);
    EXPECT_NEAR(again.T().value(), T, 1e-9 * std::max(1.0, T));
  }
  const auto inf = family_member_absorbed_at(AbsorptionTime::never(), s.opt, s.prefs);
  EXPECT_FALSE(inf.T().is_finite());
}

TEST(FamilyMember, AbsorptionMonotoneAndContinuous) {
  const auto s = fixture::baseline();
  const double Ac = constant_member_A0(s.opt, s.prefs);
  double previous = 0.0;
  for (int k = 1; k < 50; ++k) {
    const auto m = family_member(Ac * k / 50.0, s.opt, s.prefs);
    ASSERT_TRUE(m.T().is_finite());
    EXPECT_GT(m.T().value(), previous);
    previous = m.T().value();
    // A(T - delta) -> 0
    double last = INFINITY;
    for (double delta : {1.0, 0.1, 0.01, 0.001}) {
      const double a = m(m.T().value() - delta);
      EXPECT_LT(a, last);
      last = a;
    }
    EXPECT_LT(last, 1e-5 * m.A0());
    EXPECT_GT(m(0.5 * m.T().value()), 0.0);
    EXPECT_LT(m(0.5 * m.T().value()), m.A0());
  }
}

TEST(OdeResidual, Examples) {
  const auto s = fixture::baseline();
  const double dt = default_fd_step(s.opt, s.prefs);
  EXPECT_NEAR(dt, 1e-4 * s.prefs.theta / s.opt.H, 1e-18);
  std::vector<double> grid;
  for (int k = 0; k < 80; ++k) grid.push_back(k * 1.0);
  const auto c = family_member(constant_member_A0(s.opt, s.prefs), s.opt, s.prefs);
  EXPECT_LT(ode_residual(c, grid, dt), 1e-9);
  const auto m = family_member(fz::baseline_A0_half, s.opt, s.prefs);
  const double scale = s.opt.H * fz::baseline_A0_half;
  EXPECT_LT(ode_residual(m, grid, dt), 1e-6 * scale);
  std::vector<double> late{82.0, 90.0, 200.0};
  EXPECT_EQ(ode_residual(m, late, dt), 0.0);
  EXPECT_THROW(ode_residual(m, grid, 0.0), Error);
}

TEST(OdeResidual, AtTheAbsorptionKink) {
  const auto s = fixture::baseline();
  const double dt = default_fd_step(s.opt, s.prefs);
  const auto m = family_member(fz::baseline_A0_half, s.opt, s.prefs);
  const double T = fz::baseline_T_half;
  const double scale = s.opt.H * fz::baseline_A0_half;
  for (double off : {-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5}) {
    EXPECT_LT(ode_defect(m, T + off * dt, dt), 1e-6 * scale) << off;
  }
  // a symmetric stencil across T sees the jump in A''
  const double central = std::abs((m(T + dt) - m(T - dt)) / (2 * dt) - m.drift(m(T)));
  EXPECT_GT(central, 1e-6 * scale);
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ezsdu/analysis.hpp"
#include "ezsdu/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ezsdu;
namespace fz = oracle::frozen;

TEST(Residual, Examples) {
  const auto s = fixture::baseline();
  const Lattice L = fixture::lattice(s, 30, 15.0, Calibration::LogMoments);
  const auto U = proportional_consumption(L, s.prefs);
  const auto W = solve_backward(U, TailCondition::proportional(s.opt), L, s.prefs);
  EXPECT_LT(residual(W, U, L, s.prefs), 1e-12);

  AdaptedProcess bumped = W;
  bumped.set(10, 4, 1.01 * W.value(10, 4));
  const double r = residual(bumped, U, L, s.prefs);
  EXPECT_GT(r, 0.005);
  EXPECT_LT(r, 0.0105);

  EXPECT_EQ(residual(AdaptedProcess(30), U, L, s.prefs), 0.0);
}

TEST(Properness, Examples) {
  const auto s = fixture::baseline();
  const Lattice L = fixture::lattice(s, 120, 120.0);
  const auto U = proportional_consumption(L, s.prefs);
  const auto J = compute_J(U, TailCondition::proportional(s.opt), L, s.prefs);

  const auto constant = embed_family_member(constant_member_A0(s.opt, s.prefs), L, s.prefs);
  EXPECT_TRUE(is_proper(constant, J).proper);

  const auto half = embed_family_member(fz::baseline_A0_half, L, s.prefs);
  const auto p = is_proper(half, J);
  EXPECT_FALSE(p.proper);
  ASSERT_FALSE(p.witnesses.empty());
  for (const auto& w : p.witnesses) EXPECT_GE(L.time(w.step), fz::baseline_T_half);
  int first = 1 << 30;
  for (const auto& w : p.witnesses) first = std::min(first, w.step);
  EXPECT_EQ(first, static_cast<int>(std::ceil(fz::baseline_T_half)));

  EXPECT_FALSE(is_proper(AdaptedProcess(120), J).proper);
}

TEST(CrraOrder, Examples) {
  const auto s = fixture::baseline();
  const Lattice L = fixture::lattice(s, 40, 40.0);
  const auto U = proportional_consumption(L, s.prefs);
  const auto tail = TailCondition::proportional(s.opt);
  const auto J = compute_J(U, tail, L, s.prefs);
  const auto W = picard_solve(U, {}, tail, L, s.prefs).W;
  const auto c = crra_order_check(W, J);
  ASSERT_TRUE(c.has_value());
  const double target = std::pow(s.opt.H, 1.0 - s.prefs.theta);
  EXPECT_NEAR(c->lower / target, 1.0, 1e-10);
  EXPECT_NEAR(c->upper / target, 1.0, 1e-10);

  const auto improper =
      embed_family_member(family_member_absorbed_at(AbsorptionTime::at(20.0), s.opt, s.prefs).A0(), L,
                          s.prefs);
  EXPECT_FALSE(crra_order_check(improper, J).has_value());

  AdaptedProcess twice(40);
  for (int i = 0; i <= 40; ++i) {
    for (int j = 0; j <= i; ++j) twice.set(i, j, 2.0 * J.value(i, j));
  }
  const auto t = crra_order_check(twice, J);
  ASSERT_TRUE(t.has_value());
  EXPECT_DOUBLE_EQ(t->lower, 2.0);
  EXPECT_DOUBLE_EQ(t->upper, 2.0);
}

TEST(Comparison, Examples) {
  const auto s = fixture::baseline();
  std::mt19937_64 rng(51);
  const Lattice L = fixture::lattice(s, 10, 5.0);
  const auto base = proportional_consumption(L, s.prefs);
  const auto tail = TailCondition::proportional(s.opt);
  const auto U1 = fixture::modulated(base, rng, 0.5, 1.0);
  AdaptedProcess U2(10), Lam(10);
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j <= i; ++j) {
      U2.set(i, j, 1.1 * U1.value(i, j), U1.decay(i, j));
      Lam.set(i, j, 2.5 * base.value(i, j), base.decay(i, j));
    }
  }
  const PerturbationSpec p{0.1, 0.001, Lam};
  const auto W1 = solve_perturbed(U1, p, tail, L, s.prefs);
  const auto W2 = solve_perturbed(U2, p, tail, L, s.prefs);

  const auto same = comparison_check(W1, W1, U1, U1, 0.1, 0.1, Lam, L);
  EXPECT_TRUE(same.holds);
  EXPECT_EQ(same.worst_excess, 0.0);

  const auto up = comparison_check(W1, W2, U1, U2, 0.1, 0.1, Lam, L);
  EXPECT_TRUE(up.holds);
  EXPECT_EQ(up.worst_excess, 0.0);

  const auto down = comparison_check(W2, W1, U1, U2, 0.1, 0.1, Lam, L);
  EXPECT_FALSE(down.holds);
  ASSERT_TRUE(down.first_violation.has_value());
  EXPECT_GT(down.worst_excess, 0.0);

  EXPECT_THROW(comparison_check(W1, W2, U1, U2, 0.0, 0.0, Lam, L), Error);
  EXPECT_THROW(comparison_check(W1, W2, U1, U2, 0.2, 0.1, Lam, L), Error);
  EXPECT_THROW(comparison_check(W2, W1, U2, U1, 0.1, 0.1, Lam, L), Error);
  try {
    comparison_check(W1, W2, U1, U2, 0.1, 0.0, std::nullopt, L);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HypothesisUnmet);
  }
}

TEST(ConceptAgreement, Proportional) {
  const auto s = fixture::baseline();
  const Lattice L = fixture::lattice(s, 40, 20.0);
  const auto r = concept_agreement(proportional_consumption(L, s.prefs),
                                   TailCondition::proportional(s.opt), L, s.prefs);
  EXPECT_TRUE(r.concept_agreement) << r.note;
  EXPECT_TRUE(r.proper);
  ASSERT_TRUE(r.crra_order.has_value());
  EXPECT_LT(*r.extremal_gap, 1e-6);
  EXPECT_LT(r.residual, 1e-12);
}

TEST(ConceptAgreement, Modulated) {
  const auto s = fixture::r_below_one();
  std::mt19937_64 rng(52);
  const Lattice L = fixture::lattice(s, 30, 20.0);
  const auto U = fixture::modulated(proportional_consumption(L, s.prefs), rng);
  const auto r = concept_agreement(U, TailCondition::proportional(s.opt), L, s.prefs);
  EXPECT_TRUE(r.concept_agreement) << r.note;
  EXPECT_LT(*r.extremal_gap, 1e-4);
}

TEST(ConceptAgreement, IndicatorFailsPrecondition) {
  const auto s = fixture::baseline();
  const Lattice L = fixture::lattice(s, 20, 10.0);
  const auto stops = StoppingSpec::deterministic(20, 8, std::nullopt);
  const auto U = indicator_consumption(0.5, stops, L);
  const auto r = concept_agreement(U, indicator_tail(0.5, stops, L, s.prefs), L, s.prefs);
  EXPECT_FALSE(r.concept_agreement);
  EXPECT_NE(r.note.find("precondition"), std::string::npos);
  EXPECT_FALSE(r.extremal_gap.has_value());
}

TEST(FamilyDemo, Examples) {
  const auto s = fixture::baseline();
  const Lattice L = fixture::lattice(s, 150, 150.0);
  const double Ac = constant_member_A0(s.opt, s.prefs);
  const std::vector<double> A0s{Ac, Ac / 4.0, 0.0};
  const auto reports = improper_family_demo(s.opt, A0s, L, s.prefs);
  ASSERT_EQ(reports.size(), 3u);
  EXPECT_TRUE(reports[0].proper);
  EXPECT_FALSE(reports[1].proper);
  EXPECT_FALSE(reports[2].proper);
  EXPECT_EQ(reports[2].residual, 0.0);
  for (const auto& r : reports) {
    EXPECT_LT(r.residual, 1e-12) << r.label;
    EXPECT_TRUE(r.concept_agreement) << r.label;
  }
}

TEST(FamilyDemo, ResidualIsFirstOrderOnLogLattice) {
  const auto s = fixture::baseline();
  const double Ac = constant_member_A0(s.opt, s.prefs);
  const std::vector<double> A0s{Ac, Ac / 4.0};
  double previous = INFINITY;
  for (int n : {50, 100, 200}) {
    const Lattice L = fixture::lattice(s, n, 100.0, Calibration::LogMoments);
    const auto reports = improper_family_demo(s.opt, A0s, L, s.prefs);
    const double worst = std::max(reports[0].residual, reports[1].residual);
    EXPECT_LT(worst, previous);
    previous = worst;
    EXPECT_TRUE(reports[0].proper);
    EXPECT_FALSE(reports[1].proper);
  }
}

TEST(Invariants, ClassificationOverFamilyAndZeroTail) {
  const auto s = fixture::baseline();
  // horizon beyond every absorption time of the members below
  const Lattice L = fixture::lattice(s, 100, 400.0);
  const auto U = proportional_consumption(L, s.prefs);
  const auto tail = TailCondition::proportional(s.opt);
  const auto J = compute_J(U, tail, L, s.prefs);
  const auto pic = picard_solve(U, {}, tail, L, s.prefs);
  const auto ex = extremal_solve(U, U, std::nullopt, tail, L, s.prefs);
  const double Ac = constant_member_A0(s.opt, s.prefs);

  std::vector<AdaptedProcess> candidates;
  for (int k = 0; k <= 10; ++k) candidates.push_back(embed_family_member(Ac * k / 10.0, L, s.prefs));
  candidates.push_back(solve_backward(U, TailCondition::zero(), L, s.prefs));

  for (const auto& W : candidates) {
    const auto order = crra_order_check(W, J);
    const auto p = is_proper(W, J);
    if (order) {
      EXPECT_TRUE(p.proper);
    }
    for (std::size_t k = 0; k < W.size(); ++k) {
      EXPECT_GE(ex.W.values()[k], W.values()[k] * (1 - 1e-9));
    }
    if (p.proper) {
      EXPECT_LT(fixture::max_rel_diff(W, pic.W), 1e-8);
    }
    bool below_band = false;
    for (std::size_t k = 0; k < W.size(); ++k) {
      if (W.values()[k] < pic.certificate.lower.values()[k] * (1 - 1e-9)) below_band = true;
    }
    if (below_band) {
      EXPECT_FALSE(p.proper);
    }
  }
}

TEST(Invariants, ArgmaxIgnoresWealth) {
  for (const auto& s : {fixture::baseline(), fixture::r_below_one()}) {
    for (double x : {0.5, 1.0, 7.0}) {
      const auto best = oracle::grid_max(
          [&](double pi, double xi) -> double {
            const Strategy st = make_strategy(pi, xi, s.market, s.prefs);
            if (!st.in_domain()) return -INFINITY;
            return proportional_h(st, s.prefs).h_value * std::pow(x, 1.0 - s.prefs.R);
          },
          s.opt.pi - 0.02, s.opt.pi + 0.02, 1e-3, std::max(1e-4, s.opt.xi - 0.002),
          s.opt.xi + 0.002, 1e-4);
      EXPECT_LE(std::abs(best.x - s.opt.pi), 1e-3);
      EXPECT_LE(std::abs(best.y - s.opt.xi), 1e-4);
    }
  }
}

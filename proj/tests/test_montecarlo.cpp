#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ezsdu/error.hpp"
#include "ezsdu/montecarlo.hpp"
#include "fixtures.hpp"

using namespace ezsdu;

namespace {

// Sample mean and standard error of X_T^{1-R}.
std::pair<double, double> power_moment(const PathBatch& b, double R) {
  double sum = 0.0, sq = 0.0;
  for (int p = 0; p < b.n_paths; ++p) {
    const double v = std::pow(b.X(p, b.n_steps), 1.0 - R);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / b.n_paths;
  const double var = (sq / b.n_paths - mean * mean) * b.n_paths / (b.n_paths - 1.0);
  return {mean, std::sqrt(var / b.n_paths)};
}

}  // namespace

TEST(Simulate, PowerMomentMatchesGrowth) {
  for (const auto& s : {fixture::baseline(), fixture::r_below_one()}) {
    SimulationSpec spec{20000, 10, 10.0, 3, 1.0};
    const auto b = simulate(s.opt, s.market, spec);
    ASSERT_EQ(b.paths.size(), static_cast<std::size_t>(20000 * 11));
    const auto [mean, se] = power_moment(b, s.prefs.R);
    EXPECT_NEAR(mean, std::exp(-s.opt.H * 10.0), 3.0 * se);
    for (int p = 0; p < 20; ++p) EXPECT_EQ(b.X(p, 0), 1.0);
  }
}

TEST(Simulate, DeterministicWithoutRisk) {
  const auto s = fixture::baseline();
  const Strategy st = make_strategy(0.0, 0.03, s.market, s.prefs);
  const auto b = simulate(st, s.market, {50, 8, 4.0, 9, 2.0});
  for (int p = 0; p < 50; ++p) {
    for (int k = 0; k <= 8; ++k) {
      EXPECT_NEAR(b.X(p, k), 2.0 * std::exp((0.02 - 0.03) * 0.5 * k), 1e-14);
    }
  }
}

TEST(Simulate, SeedDeterminism) {
  const auto s = fixture::baseline();
  const auto a = simulate(s.opt, s.market, {500, 20, 5.0, 7, 1.0});
  const auto b = simulate(s.opt, s.market, {500, 20, 5.0, 7, 1.0});
  const auto c = simulate(s.opt, s.market, {500, 20, 5.0, 8, 1.0});
  EXPECT_EQ(a.paths, b.paths);
  EXPECT_NE(a.paths, c.paths);
  // a path does not depend on how many others are drawn
  const auto d = simulate(s.opt, s.market, {100, 20, 5.0, 7, 1.0});
  for (int k = 0; k <= 20; ++k) EXPECT_EQ(d.X(99, k), a.X(99, k));
}

TEST(Simulate, Rejects) {
  const auto s = fixture::baseline();
  EXPECT_THROW(simulate(s.opt, s.market, {0, 10, 1.0, 1, 1.0}), Error);
  EXPECT_THROW(simulate(s.opt, s.market, {10, 0, 1.0, 1, 1.0}), Error);
  EXPECT_THROW(simulate(s.opt, s.market, {10, 10, -1.0, 1, 1.0}), Error);
  EXPECT_THROW(simulate(s.opt, s.market, {10, 10, 1.0, 1, 0.0}), Error);
}

TEST(Residual, ProportionalCandidateIsUnbiased) {
  for (const auto& s : {fixture::baseline(), fixture::r_below_one()}) {
    const auto b = simulate(s.opt, s.market, {20000, 100, 50.0, 2, 1.0});
    const auto good = residual_estimate(Candidate::proportional(s.opt, s.prefs), b, s.prefs);
    EXPECT_LT(std::abs(good.z()), 3.5);
    const auto bad = residual_estimate(Candidate::proportional(s.opt, s.prefs, 1.1), b, s.prefs);
    EXPECT_GT(std::abs(bad.z()), 5.0);
  }
}

TEST(Residual, DeterministicPathsAreQuadratureExact) {
  // without risk the residual is the trapezoid error of a smooth integrand
  const auto s = fixture::baseline();
  const Strategy st = make_strategy(0.0, s.opt.xi, s.market, s.prefs);
  double previous = INFINITY;
  for (int n : {20, 40, 80}) {
    const auto b = simulate(st, s.market, {4, n, 30.0, 1, 1.0});
    const auto est = residual_estimate(Candidate::proportional(st, s.prefs), b, s.prefs);
    EXPECT_EQ(est.std_error, 0.0);
    const double h = proportional_h(st, s.prefs).h_value;
    const double rel = std::abs(est.estimate / h);
    EXPECT_LT(rel, previous / 3.5);
    previous = rel;
  }
  EXPECT_LT(previous, 1e-4);
}

TEST(Residual, FamilyMembersAreUnbiased) {
  const auto s = fixture::baseline();
  const auto b = simulate(s.opt, s.market, {20000, 100, 50.0, 4, 1.0});
  for (double T : {20.0, 35.0}) {
    const auto m = family_member_absorbed_at(AbsorptionTime::at(T), s.opt, s.prefs);
    const auto est = residual_estimate(Candidate::family(m), b, s.prefs);
    EXPECT_LT(std::abs(est.z()), 3.5) << T;
  }
}

TEST(Residual, StandardErrorScaling) {
  const auto s = fixture::baseline();
  const auto cand = Candidate::proportional(s.opt, s.prefs, 1.1);
  std::vector<double> se;
  for (int n : {2000, 8000, 32000}) {
    const auto b = simulate(s.opt, s.market, {n, 20, 20.0, 5, 1.0});
    se.push_back(residual_estimate(cand, b, s.prefs).std_error);
  }
  for (std::size_t k = 1; k < se.size(); ++k) {
    EXPECT_NEAR(se[k - 1] / se[k], 2.0, 0.3);
  }
}

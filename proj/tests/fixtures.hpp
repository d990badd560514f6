#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "ezsdu/closed_form.hpp"
#include "ezsdu/lattice.hpp"
#include "ezsdu/params.hpp"

namespace fixture {

struct Setup {
  ezsdu::PreferenceParams prefs;
  ezsdu::MarketParams market;
  ezsdu::Strategy opt;
};

inline Setup baseline() {
  Setup s;
  s.prefs = ezsdu::derive_preferences(2.0, 1.5);
  s.market = ezsdu::derive_market(0.02, 0.05, 0.2, s.prefs);
  s.opt = ezsdu::optimal_strategy(s.market, s.prefs);
  return s;
}

inline Setup r_below_one() {
  Setup s;
  s.prefs = ezsdu::derive_preferences(0.5, 0.75);
  s.market = ezsdu::derive_market(-0.05, -0.04, 0.2, s.prefs);
  s.opt = ezsdu::optimal_strategy(s.market, s.prefs);
  return s;
}

inline ezsdu::Lattice lattice(const Setup& s, int n, double horizon,
                              ezsdu::Calibration cal = ezsdu::Calibration::PowerMoment) {
  return ezsdu::build_lattice({n, horizon, 0.5, cal, 1.0}, s.market, s.prefs, s.opt);
}

// Proportional stream times an i.i.d. node factor in [lo, hi] before the
// last step.
inline ezsdu::AdaptedProcess modulated(const ezsdu::AdaptedProcess& base, std::mt19937_64& rng,
                                       double lo = 0.5, double hi = 2.0) {
  std::uniform_real_distribution<double> factor(lo, hi);
  const int n = base.n_steps();
  ezsdu::AdaptedProcess U(n);
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= i; ++j) {
      U.set(i, j, base.value(i, j) * (i == n ? 1.0 : factor(rng)), base.decay(i, j));
    }
  }
  return U;
}

inline double max_rel_diff(const ezsdu::AdaptedProcess& a, const ezsdu::AdaptedProcess& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double x = a.values()[k];
    const double y = b.values()[k];
    const double scale = std::max(std::abs(x), std::abs(y));
    if (scale > 0.0) worst = std::max(worst, std::abs(x - y) / scale);
  }
  return worst;
}

}  // namespace fixture

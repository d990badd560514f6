#pragma once

// Agent preferences, the Black-Scholes-Merton market and constant
// proportional strategies. Records are validated on construction and
// immutable afterwards.

namespace ezsdu {

/// Epstein-Zin coefficients. theta = (1-R)/(1-S) > 1 and
/// rho = (theta-1)/theta lies in (0,1).
struct PreferenceParams {
  double R = 0.0;
  double S = 0.0;
  double theta = 0.0;
  double rho = 0.0;
};

struct MarketParams {
  double r = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double lambda = 0.0;  ///< Sharpe ratio (mu - r) / sigma
  double eta = 0.0;     ///< ((S-1)/S)(r + lambda^2/(2R)); optimal consumption rate
};

/// Constant proportional strategy: invest pi of wealth in the risky asset,
/// consume at rate xi times wealth. H is the growth constant with
/// E_t[X_s^{1-R}] = X_t^{1-R} exp(-H (s-t)).
struct Strategy {
  double pi = 0.0;
  double xi = 0.0;
  double H = 0.0;

  bool in_domain() const { return xi > 0.0 && H > 0.0; }
};

/// Throws ThetaOutOfRegime unless R, S are in (0,1)u(1,inf) with theta > 1.
PreferenceParams derive_preferences(double R, double S);

/// Throws InvalidArgument for sigma <= 0 and IllPosed when eta <= 0.
MarketParams derive_market(double r, double mu, double sigma, const PreferenceParams& prefs);

/// H(pi, xi) = (R-1)(r + pi(mu-r) - xi - pi^2 sigma^2 R / 2). May be negative.
double growth_H(double pi, double xi, const MarketParams& market, const PreferenceParams& prefs);

/// Strategy with H filled in. Does not require membership in D.
Strategy make_strategy(double pi, double xi, const MarketParams& market,
                       const PreferenceParams& prefs);

}  // namespace ezsdu

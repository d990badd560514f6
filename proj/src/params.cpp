#include "ezsdu/params.hpp"

#include <cmath>
#include <sstream>

#include "ezsdu/error.hpp"

namespace ezsdu {

namespace {

bool admissible_coefficient(double x) { return std::isfinite(x) && x > 0.0 && x != 1.0; }

}  // namespace

PreferenceParams derive_preferences(double R, double S) {
  if (!admissible_coefficient(R) || !admissible_coefficient(S)) {
    std::ostringstream msg;
    msg << "R and S must lie in (0,1)u(1,inf), got R=" << R << " S=" << S;
    throw Error(ErrorCode::ThetaOutOfRegime, msg.str());
  }
  if ((1.0 - R) * (1.0 - S) <= 0.0) {
    std::ostringstream msg;
    msg << "1-R and 1-S have opposite signs (R=" << R << ", S=" << S << ")";
    throw Error(ErrorCode::ThetaOutOfRegime, msg.str());
  }
  PreferenceParams p;
  p.R = R;
  p.S = S;
  p.theta = (1.0 - R) / (1.0 - S);
  if (!(p.theta > 1.0)) {
    std::ostringstream msg;
    msg << "theta=(1-R)/(1-S)=" << p.theta << " is not > 1";
    throw Error(ErrorCode::ThetaOutOfRegime, msg.str());
  }
  // (S-R)/(1-R) is the cancellation-free form of (theta-1)/theta.
  p.rho = (S - R) / (1.0 - R);
  return p;
}

MarketParams derive_market(double r, double mu, double sigma, const PreferenceParams& prefs) {
  if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(r) || !std::isfinite(mu)) {
    throw Error(ErrorCode::InvalidArgument, "market requires finite r, mu and sigma > 0");
  }
  MarketParams m;
  m.r = r;
  m.mu = mu;
  m.sigma = sigma;
  m.lambda = (mu - r) / sigma;
  m.eta = (prefs.S - 1.0) / prefs.S * (r + m.lambda * m.lambda / (2.0 * prefs.R));
  if (!(m.eta > 0.0)) {
    std::ostringstream msg;
    msg << "eta=" << m.eta << " <= 0: the optimal problem is ill-posed";
    throw Error(ErrorCode::IllPosed, msg.str());
  }
  return m;
}

double growth_H(double pi, double xi, const MarketParams& market, const PreferenceParams& prefs) {
  const double drift = market.r + pi * (market.mu - market.r) - xi -
                       0.5 * pi * pi * market.sigma * market.sigma * prefs.R;
  return (prefs.R - 1.0) * drift;
}

Strategy make_strategy(double pi, double xi, const MarketParams& market,
                       const PreferenceParams& prefs) {
  return Strategy{pi, xi, growth_H(pi, xi, market, prefs)};
}

}  // namespace ezsdu

#include "ezsdu/montecarlo.hpp"

#include <cmath>
#include <random>

#include "ezsdu/error.hpp"

namespace ezsdu {

namespace {

// Compensated running sum.
class NeumaierSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

PathBatch simulate(const Strategy& strategy, const MarketParams& market, const SimulationSpec& spec) {
  if (spec.n_paths <= 0 || spec.n_steps <= 0 || !(spec.horizon > 0.0) || !(spec.x0 > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "simulation needs positive paths, steps, horizon, x0");
  }
  PathBatch batch;
  batch.n_paths = spec.n_paths;
  batch.n_steps = spec.n_steps;
  batch.horizon = spec.horizon;
  batch.seed = spec.seed;
  batch.strategy = strategy;
  batch.paths.resize(static_cast<std::size_t>(spec.n_paths) * (spec.n_steps + 1));

  const double dt = batch.dt();
  const double vol = strategy.pi * market.sigma;
  const double drift = (market.r + strategy.pi * (market.mu - market.r) - strategy.xi -
                        0.5 * vol * vol) * dt;
  const double scale = vol * std::sqrt(dt);
  for (int p = 0; p < spec.n_paths; ++p) {
    std::mt19937_64 engine = path_engine(spec.seed, static_cast<std::uint64_t>(p));
    std::normal_distribution<double> normal;
    double log_x = std::log(spec.x0);
    double* row = batch.paths.data() + static_cast<std::size_t>(p) * (spec.n_steps + 1);
    row[0] = spec.x0;
    for (int k = 1; k <= spec.n_steps; ++k) {
      log_x += drift + scale * normal(engine);
      row[k] = std::exp(log_x);
    }
  }
  return batch;
}

Candidate Candidate::proportional(const Strategy& strategy, const PreferenceParams& prefs,
                                  double scale) {
  if (!strategy.in_domain()) throw Error(ErrorCode::OutsideD, "candidate strategy outside D");
  const double a = scale * std::pow(prefs.theta / strategy.H, prefs.theta);
  return Candidate{strategy, [a](double) { return a; }};
}

Candidate Candidate::family(const ImproperFamilyMember& member) {
  return Candidate{member.strategy(), [member](double t) { return member(t); }};
}

ResidualEstimate residual_estimate(const Candidate& candidate, const PathBatch& batch,
                                   const PreferenceParams& prefs) {
  if (batch.n_paths < 2) throw Error(ErrorCode::InvalidArgument, "need at least two paths");
  const int n = batch.n_steps;
  const double dt = batch.dt();
  const double xi = candidate.strategy.xi;
  const double kappa = 1.0 - prefs.R;

  // In W = (1-R)V units the aggregator is theta a^rho (xi X)^{1-R}.
  std::vector<double> a(n + 1);
  std::vector<double> weight(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = k * dt;
    a[k] = candidate.coefficient(t);
    weight[k] = prefs.theta * std::pow(std::max(a[k], 0.0), prefs.rho) * dt *
                ((k == 0 || k == n) ? 0.5 : 1.0);
  }

  std::vector<double> per_path(batch.n_paths);
  for (int p = 0; p < batch.n_paths; ++p) {
    double integral = 0.0;
    for (int k = 0; k <= n; ++k) integral += weight[k] * std::pow(xi * batch.X(p, k), kappa);
    const double w0 = a[0] * std::pow(xi * batch.X(p, 0), kappa);
    const double wT = a[n] * std::pow(xi * batch.X(p, n), kappa);
    per_path[p] = (w0 - integral - wT) / kappa;
  }

  NeumaierSum sum;
  for (double v : per_path) sum.add(v);
  const double mean = sum.value() / batch.n_paths;
  NeumaierSum squares;
  for (double v : per_path) squares.add((v - mean) * (v - mean));
  const double variance = squares.value() / (batch.n_paths - 1);
  return ResidualEstimate{mean, std::sqrt(variance / batch.n_paths)};
}

}  // namespace ezsdu

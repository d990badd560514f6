#include "ezsdu/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ezsdu/closed_form.hpp"
#include "ezsdu/error.hpp"

namespace ezsdu {

namespace {

void require_shape(const AdaptedProcess& a, int n_steps, const char* what) {
  if (a.n_steps() != n_steps) {
    std::ostringstream msg;
    msg << what << " has " << a.n_steps() << " steps, expected " << n_steps;
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
}

double max_ratio(const AdaptedProcess& W, const AdaptedProcess& J) {
  double kappa = 0.0;
  for (int i = 0; i <= J.n_steps(); ++i) {
    for (int j = 0; j <= i; ++j) {
      if (J.value(i, j) > 0.0) kappa = std::max(kappa, W.value(i, j) / J.value(i, j));
    }
  }
  return kappa;
}

std::string describe(NodeIndex n) {
  std::ostringstream out;
  out << "(" << n.step << "," << n.node << ")";
  return out.str();
}

}  // namespace

double residual(const AdaptedProcess& W, const AdaptedProcess& U, const Lattice& lattice,
                const PreferenceParams& prefs) {
  const int n = lattice.n_steps();
  require_shape(W, n, "W");
  require_shape(U, n, "U");
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto next = W.level(i + 1);
    for (int j = 0; j <= i; ++j) {
      const double w = W.value(i, j);
      const double ahead = lattice.expect(next, j);
      const double scale = std::max({w, ahead, std::numeric_limits<double>::min()});
      const double moved = forward_step(w, step_integral(U, i, j, lattice.dt()), prefs);
      worst = std::max(worst, std::abs(moved - ahead) / scale);
    }
  }
  return worst;
}

Properness is_proper(const AdaptedProcess& W, const AdaptedProcess& J, double tol) {
  require_shape(W, J.n_steps(), "W");
  const double kappa = max_ratio(W, J);
  Properness out;
  for (int i = 0; i <= J.n_steps(); ++i) {
    for (int j = 0; j <= i; ++j) {
      const double y = J.value(i, j);
      if (y > 0.0 && W.value(i, j) <= tol * kappa * y) out.witnesses.push_back({i, j});
    }
  }
  out.proper = out.witnesses.empty();
  return out;
}

std::optional<CrraOrder> crra_order_check(const AdaptedProcess& W, const AdaptedProcess& J,
                                          double tol) {
  if (!is_proper(W, J, tol).proper) return std::nullopt;
  CrraOrder c{std::numeric_limits<double>::infinity(), 0.0};
  bool any = false;
  for (int i = 0; i <= J.n_steps(); ++i) {
    for (int j = 0; j <= i; ++j) {
      const double y = J.value(i, j);
      if (y <= 0.0) continue;
      const double ratio = W.value(i, j) / y;
      c.lower = std::min(c.lower, ratio);
      c.upper = std::max(c.upper, ratio);
      any = true;
    }
  }
  if (!any) return CrraOrder{0.0, 0.0};
  return c;
}

ComparisonResult comparison_check(const AdaptedProcess& W1, const AdaptedProcess& W2,
                                  const AdaptedProcess& U1, const AdaptedProcess& U2, double eps1,
                                  double eps2, const std::optional<AdaptedProcess>& Lambda,
                                  const Lattice& lattice, double slack) {
  const int n = lattice.n_steps();
  for (const AdaptedProcess* p : {&W1, &W2, &U1, &U2}) require_shape(*p, n, "process");
  if (!(eps2 > 0.0)) throw Error(ErrorCode::HypothesisUnmet, "comparison needs eps2 > 0");
  if (!(eps1 >= 0.0) || eps1 > eps2) {
    throw Error(ErrorCode::HypothesisUnmet, "comparison needs 0 <= eps1 <= eps2");
  }
  if (Lambda) require_shape(*Lambda, n, "Lambda");
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= i; ++j) {
      if (U1.value(i, j) > U2.value(i, j)) {
        throw Error(ErrorCode::HypothesisUnmet, "U1 exceeds U2 at " + describe({i, j}));
      }
      if (Lambda && U2.value(i, j) > Lambda->value(i, j) * (1.0 + 1e-12)) {
        throw Error(ErrorCode::HypothesisUnmet, "U2 exceeds Lambda at " + describe({i, j}));
      }
    }
  }
  ComparisonResult out;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double a = W1.value(i, j);
      const double b = W2.value(i, j);
      const double scale = std::max(a, b);
      if (scale <= 0.0) continue;
      const double excess = (a - b) / scale;
      out.worst_excess = std::max(out.worst_excess, excess);
      if (excess > slack && out.holds) {
        out.holds = false;
        out.first_violation = NodeIndex{i, j};
      }
    }
  }
  return out;
}

SolutionReport concept_agreement(const AdaptedProcess& U, const TailCondition& tail,
                                 const Lattice& lattice, const PreferenceParams& prefs,
                                 const AgreementOptions& options) {
  SolutionReport report;
  report.label = "concept-agreement";
  const AdaptedProcess J = compute_J(U, tail, lattice, prefs);
  try {
    self_order_constants(U, J, lattice, prefs);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotSelfOrder) throw;
    report.note = std::string("precondition failed: U^theta not self-order: ") + e.what();
    return report;
  }

  const PicardResult picard = picard_solve(U, PerturbationSpec{}, tail, lattice, prefs,
                                           options.picard);
  const ExtremalResult extremal =
      extremal_solve(U, U, std::nullopt, tail, lattice, prefs, options.extremal);

  report.residual = residual(picard.W, U, lattice, prefs);
  const Properness p_picard = is_proper(picard.W, J);
  const Properness p_extremal = is_proper(extremal.W, J);
  report.proper = p_picard.proper;
  report.witnesses = p_picard.witnesses;
  report.crra_order = crra_order_check(picard.W, J);

  double gap = 0.0;
  const auto a = picard.W.values();
  const auto b = extremal.W.values();
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double scale = std::max(a[k], b[k]);
    if (scale > 0.0) gap = std::max(gap, std::abs(a[k] - b[k]) / scale);
  }
  report.extremal_gap = gap;
  report.concept_agreement = p_picard.proper && p_extremal.proper &&
                             report.crra_order.has_value() && gap < options.tolerance;

  std::ostringstream note;
  note << "picard iterations=" << picard.iterations << " extremal levels=" << extremal.levels
       << " nu=" << extremal.nu;
  if (!extremal.converged) note << " extremal not converged (last gap " << extremal.last_gap << ")";
  if (!picard.certificate.contained) note << " picard outside certificate band";
  report.note = note.str();
  return report;
}

AdaptedProcess embed_family_member(double A0, const Lattice& lattice,
                                   const PreferenceParams& prefs) {
  const Strategy& s = lattice.strategy();
  const ImproperFamilyMember member = family_member(A0, s, prefs);
  const double decay = s.H / prefs.theta;
  AdaptedProcess W(lattice.n_steps());
  for (int i = 0; i <= lattice.n_steps(); ++i) {
    const double a = member(lattice.time(i));
    for (int j = 0; j <= i; ++j) {
      W.set(i, j, a * std::pow(s.xi * lattice.wealth(i, j), 1.0 - prefs.R), decay);
    }
  }
  return W;
}

std::vector<SolutionReport> improper_family_demo(const Strategy& strategy,
                                                 std::span<const double> A0_list,
                                                 const Lattice& lattice,
                                                 const PreferenceParams& prefs) {
  if (strategy.pi != lattice.strategy().pi || strategy.xi != lattice.strategy().xi) {
    throw Error(ErrorCode::InvalidArgument, "lattice was built for a different strategy");
  }
  const AdaptedProcess U = proportional_consumption(lattice, prefs);
  const AdaptedProcess J = compute_J(U, TailCondition::proportional(strategy), lattice, prefs);
  std::vector<SolutionReport> out;
  out.reserve(A0_list.size());
  for (double A0 : A0_list) {
    const ImproperFamilyMember member = family_member(A0, strategy, prefs);
    const AdaptedProcess W = embed_family_member(A0, lattice, prefs);
    SolutionReport r;
    std::ostringstream label;
    label.precision(17);
    label << "A0=" << A0 << " T=";
    if (member.T().is_finite()) {
      label << member.T().value();
    } else {
      label << "inf";
    }
    r.label = label.str();
    r.residual = residual(W, U, lattice, prefs);
    const Properness p = is_proper(W, J);
    r.proper = p.proper;
    r.witnesses = p.witnesses;
    r.crra_order = crra_order_check(W, J);
    r.concept_agreement = r.proper == !member.T().is_finite();
    if (member.T().is_finite() && member.T().value() >= lattice.spec().horizon) {
      r.note = "absorption beyond the lattice horizon";
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ezsdu

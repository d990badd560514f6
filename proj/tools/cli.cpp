#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"
#include "ezsdu/analysis.hpp"
#include "ezsdu/closed_form.hpp"
#include "ezsdu/error.hpp"
#include "ezsdu/fixed_point.hpp"
#include "ezsdu/lattice.hpp"
#include "ezsdu/montecarlo.hpp"
#include "ezsdu/params.hpp"

namespace ezsdu::cli {

namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorCode::Config, message);
}

// Collects header comments and rows, then writes them in one go.
class Table {
 public:
  Table(std::string command, const RunConfig& config) {
    header_.push_back("command=" + command);
    for (const auto& [key, value] : config.values()) {
      if (key != "output") header_.push_back(key + "=" + value);
      echoed_.push_back(key);
    }
  }
  /// Result line; skipped when the config already fixed that key.
  void note(const std::string& key, const std::string& value) {
    if (std::find(echoed_.begin(), echoed_.end(), key) != echoed_.end()) return;
    header_.push_back(key + "=" + value);
  }
  void note(const std::string& key, double value) { note(key, num(value)); }
  void columns(std::vector<std::string> names) { columns_ = std::move(names); }
  void row(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) line += ',';
      line += cells[k];
    }
    rows_.push_back(std::move(line));
  }

  void write(std::ostream& os) const {
    for (const auto& h : header_) os << "# " << h << '\n';
    for (std::size_t k = 0; k < columns_.size(); ++k) os << (k ? "," : "") << columns_[k];
    os << '\n';
    for (const auto& r : rows_) os << r << '\n';
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::string> echoed_;
  std::vector<std::string> columns_;
  std::vector<std::string> rows_;
};

struct Model {
  PreferenceParams prefs;
  MarketParams market;
};

Model model(const RunConfig& c) {
  Model m;
  m.prefs = derive_preferences(c.number("R"), c.number("S"));
  m.market = derive_market(c.number("r"), c.number("mu"), c.number("sigma"), m.prefs);
  return m;
}

// Strategy from pi/xi keys; missing entries fall back to the optimum.
Strategy chosen_strategy(const RunConfig& c, const Model& m) {
  if (c.has("pi") && c.has("xi")) return make_strategy(c.number("pi"), c.number("xi"), m.market, m.prefs);
  const Strategy opt = optimal_strategy(m.market, m.prefs);
  return make_strategy(c.has("pi") ? c.number("pi") : opt.pi, c.has("xi") ? c.number("xi") : opt.xi,
                       m.market, m.prefs);
}

Calibration calibration(const RunConfig& c) {
  const std::string& v = c.text("calibration");
  if (v == "power") return Calibration::PowerMoment;
  if (v == "log") return Calibration::LogMoments;
  config_error("calibration must be power or log, got '" + v + "'");
}

Lattice lattice_from(const RunConfig& c, const Model& m, const Strategy& s) {
  LatticeSpec spec;
  spec.n_steps = c.integer("steps");
  spec.horizon = c.number("horizon");
  spec.up_prob = c.number("up_prob");
  spec.calibration = calibration(c);
  spec.initial_wealth = c.number("x0");
  if (spec.n_steps < 1) config_error("steps must be >= 1");
  if (!(spec.horizon > 0.0)) config_error("horizon must be > 0");
  if (!(spec.up_prob > 0.0 && spec.up_prob < 1.0)) config_error("up_prob must lie in (0,1)");
  return build_lattice(spec, m.market, m.prefs, s);
}

// Consumption stream plus its tail, as chosen by the config.
struct Stream {
  AdaptedProcess U;
  TailCondition tail;
  std::optional<StoppingSpec> stops;
  double gamma = 0.0;
};

Stream stream_from(const RunConfig& c, const Model& m, const Lattice& lattice, std::ostream& err) {
  Stream st;
  const std::string& kind = c.text("consumption");
  const std::string& tail = c.text("tail");
  if (tail != "zero" && tail != "proportional") {
    config_error("tail must be zero or proportional, got '" + tail + "'");
  }
  if (tail == "zero") err << "WARNING: zero tail seeds the improper branch\n";
  if (kind == "proportional") {
    st.U = proportional_consumption(lattice, m.prefs);
    st.tail = tail == "zero" ? TailCondition::zero() : TailCondition::proportional(lattice.strategy());
  } else if (kind == "indicator") {
    st.gamma = c.number("gamma");
    const int sigma_step = c.integer("sigma_step");
    std::optional<int> tau_step;
    if (c.text("tau_step") != "none") tau_step = c.integer("tau_step");
    if (sigma_step < 0 || sigma_step > lattice.n_steps()) config_error("sigma_step out of range");
    st.stops = StoppingSpec::deterministic(lattice.n_steps(), sigma_step, tau_step);
    st.U = indicator_consumption(st.gamma, *st.stops, lattice);
    st.tail = tail == "zero" ? TailCondition::zero()
                             : indicator_tail(st.gamma, *st.stops, lattice, m.prefs);
  } else {
    config_error("consumption must be proportional or indicator, got '" + kind + "'");
  }
  return st;
}

void cmd_params(const RunConfig& c, Table& t) {
  const Model m = model(c);
  t.columns({"quantity", "value"});
  t.row({"theta", num(m.prefs.theta)});
  t.row({"rho", num(m.prefs.rho)});
  t.row({"lambda", num(m.market.lambda)});
  t.row({"eta", num(m.market.eta)});
  if (c.has("pi") && c.has("xi")) {
    t.row({"H", num(growth_H(c.number("pi"), c.number("xi"), m.market, m.prefs))});
  }
}

void cmd_optimize(const RunConfig& c, Table& t) {
  const Model m = model(c);
  const Strategy s = optimal_strategy(m.market, m.prefs);
  const double x0 = c.number("x0");
  t.columns({"quantity", "value"});
  t.row({"pi_hat", num(s.pi)});
  t.row({"xi_hat", num(s.xi)});
  t.row({"H", num(s.H)});
  t.row({"h_max", num(proportional_h(s, m.prefs).h_value)});
  t.row({"V_hat", num(candidate_value(x0, m.market, m.prefs))});
}

void cmd_family(const RunConfig& c, Table& t) {
  const Model m = model(c);
  const Strategy s = chosen_strategy(c, m);
  if (c.has("A0") == c.has("T")) config_error("family needs exactly one of A0 and T");
  const ImproperFamilyMember member =
      c.has("A0") ? family_member(c.number("A0"), s, m.prefs)
                  : family_member_absorbed_at(c.text("T") == "inf" ? AbsorptionTime::never()
                                                                   : AbsorptionTime::at(c.number("T")),
                                              s, m.prefs);
  const double T = member.T().is_finite() ? member.T().value() : INFINITY;
  double t_max = 4.0 * m.prefs.theta / s.H;
  if (member.T().is_finite() && T > 0.0) t_max = 1.25 * T;
  if (c.has("t_max")) t_max = c.number("t_max");
  const int points = c.integer("points");
  if (points < 2) config_error("points must be >= 2");
  const double fd = c.has("fd_step") ? c.number("fd_step") : default_fd_step(s, m.prefs);
  t.note("pi", s.pi);
  t.note("xi", s.xi);
  t.note("H", s.H);
  t.note("theta", m.prefs.theta);
  t.note("A0", member.A0());
  t.note("T", T);
  t.columns({"t", "A_t", "residual"});
  for (int k = 0; k < points; ++k) {
    const double time = t_max * k / (points - 1);
    t.row({num(time), num(member(time)), num(ode_defect(member, time, fd))});
  }
}

void cmd_solve_lattice(const RunConfig& c, Table& t, std::ostream& err) {
  const Model m = model(c);
  const Strategy s = chosen_strategy(c, m);
  const Lattice lattice = lattice_from(c, m, s);
  const Stream st = stream_from(c, m, lattice, err);
  const AdaptedProcess W = solve_backward(st.U, st.tail, lattice, m.prefs);

  std::optional<AdaptedProcess> lower;
  if (st.stops) {
    lower = appendix_lower_bound(st.gamma, *st.stops, lattice, m.prefs);
    t.note("lower_bound", "stopping_recursion");
  } else {
    try {
      const AdaptedProcess J = compute_J(st.U, st.tail, lattice, m.prefs);
      const SelfOrderConstants so = self_order_constants(st.U, J, lattice, m.prefs);
      const OrderRoots roots = solve_AB(so.k, so.K, 0.0, m.prefs);
      AdaptedProcess band(lattice.n_steps());
      for (int i = 0; i <= lattice.n_steps(); ++i) {
        for (int j = 0; j <= i; ++j) band.set(i, j, so.k * roots.A * J.value(i, j));
      }
      lower = std::move(band);
      t.note("lower_bound", "kA*J");
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotSelfOrder) throw;
      t.note("lower_bound", "unavailable");
    }
  }
  t.note("pi", s.pi);
  t.note("xi", s.xi);
  t.note("H", s.H);
  t.note("W0", W.value(0, 0));
  t.columns({"step", "node", "t", "X", "U", "W", "lower_bound"});
  for (int i = 0; i <= lattice.n_steps(); ++i) {
    for (int j = 0; j <= i; ++j) {
      t.row({std::to_string(i), std::to_string(j), num(lattice.time(i)), num(lattice.wealth(i, j)),
             num(st.U.value(i, j)), num(W.value(i, j)), lower ? num(lower->value(i, j)) : "nan"});
    }
  }
}

void cmd_fixed_point(const RunConfig& c, Table& t, std::ostream& err) {
  const Model m = model(c);
  const Strategy s = chosen_strategy(c, m);
  const Lattice lattice = lattice_from(c, m, s);
  const Stream st = stream_from(c, m, lattice, err);
  PerturbationSpec p;
  p.epsilon = c.number("epsilon");
  p.nu = c.number("nu");
  PicardOptions opt;
  opt.tol = c.number("tol");
  opt.max_iter = c.integer("max_iter");
  opt.substeps = c.integer("substeps");
  if (opt.substeps < 1) config_error("substeps must be >= 1");
  const PicardResult res = picard_solve(st.U, p, st.tail, lattice, m.prefs, opt);
  const OrderCertificate& cert = res.certificate;
  t.note("k", cert.k);
  t.note("K", cert.K);
  t.note("A", cert.A);
  t.note("B", cert.B);
  t.note("iterations", std::to_string(res.iterations));
  t.note("contained", cert.contained ? "true" : "false");
  t.note("W0", res.W.value(0, 0));
  t.columns({"iteration", "gap"});
  for (std::size_t k = 0; k < res.gaps.size(); ++k) t.row({std::to_string(k + 1), num(res.gaps[k])});
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

AdaptedProcess read_W(const std::string& path, int n_steps) {
  std::ifstream in(path);
  if (!in) config_error("cannot read input " + path);
  std::string line;
  std::vector<std::string> head;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    head = split(line);
    break;
  }
  const auto column = [&](const std::string& name) {
    for (std::size_t k = 0; k < head.size(); ++k) {
      if (head[k] == name) return k;
    }
    config_error("input lacks column " + name);
  };
  const std::size_t cs = column("step"), cn = column("node"), cw = column("W");
  AdaptedProcess W(n_steps);
  std::vector<char> seen(node_count(n_steps), 0);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line);
    if (cells.size() != head.size()) config_error("malformed input row: " + line);
    const int i = std::stoi(cells[cs]);
    const int j = std::stoi(cells[cn]);
    if (i < 0 || i > n_steps || j < 0 || j > i) config_error("input node outside the lattice");
    W.set(i, j, std::stod(cells[cw]));
    seen[node_offset(i, j)] = 1;
  }
  for (char s : seen) {
    if (!s) config_error("input does not cover every lattice node");
  }
  return W;
}

void cmd_classify(const RunConfig& c, Table& t, std::ostream& err) {
  const Model m = model(c);
  const Strategy s = chosen_strategy(c, m);
  const Lattice lattice = lattice_from(c, m, s);
  const Stream st = stream_from(c, m, lattice, err);
  const AdaptedProcess W = read_W(c.text("input"), lattice.n_steps());
  const AdaptedProcess J = compute_J(st.U, st.tail, lattice, m.prefs);
  const double res = residual(W, st.U, lattice, m.prefs);
  const Properness p = is_proper(W, J);
  const auto order = crra_order_check(W, J);
  const auto where = [](const std::vector<NodeIndex>& w) {
    if (w.empty()) return std::string();
    return std::to_string(w.front().step) + ":" + std::to_string(w.front().node);
  };
  t.columns({"check", "pass", "value", "witness"});
  t.row({"residual", res < 1e-8 ? "pass" : "fail", num(res), ""});
  t.row({"proper", p.proper ? "pass" : "fail", std::to_string(p.witnesses.size()), where(p.witnesses)});
  if (order) {
    t.row({"crra_order_lower", "pass", num(order->lower), ""});
    t.row({"crra_order_upper", "pass", num(order->upper), ""});
  } else {
    t.row({"crra_order", "fail", "absent", where(p.witnesses)});
  }
}

void cmd_mc_verify(const RunConfig& c, Table& t) {
  const Model m = model(c);
  const Strategy s = chosen_strategy(c, m);
  SimulationSpec spec;
  spec.n_paths = c.integer("paths");
  spec.n_steps = c.integer("steps");
  spec.horizon = c.number("horizon");
  spec.x0 = c.number("x0");
  const double seed = c.number("seed");
  if (seed < 0 || seed != std::floor(seed) || seed > 9.007199254740992e15) {
    config_error("seed must be a nonnegative integer");
  }
  spec.seed = static_cast<std::uint64_t>(seed);
  const std::string& kind = c.text("candidate");
  const double scale = c.number("scale");
  Candidate cand;
  if (kind == "proportional") {
    cand = Candidate::proportional(s, m.prefs, scale);
  } else if (kind == "family") {
    if (c.has("A0") == c.has("T")) config_error("family candidate needs exactly one of A0 and T");
    const ImproperFamilyMember member = c.has("A0")
        ? family_member(c.number("A0"), s, m.prefs)
        : family_member_absorbed_at(AbsorptionTime::at(c.number("T")), s, m.prefs);
    cand = Candidate::family(member);
    if (scale != 1.0) {
      auto base = cand.coefficient;
      cand.coefficient = [base, scale](double time) { return scale * base(time); };
    }
  } else {
    config_error("candidate must be proportional or family, got '" + kind + "'");
  }
  const PathBatch batch = simulate(s, m.market, spec);
  const ResidualEstimate est = residual_estimate(cand, batch, m.prefs);
  t.columns({"quantity", "value"});
  t.row({"estimate", num(est.estimate)});
  t.row({"std_error", num(est.std_error)});
  t.row({"z", num(est.z())});
}

const std::vector<std::string> kMarketKeys = {"R", "S", "r", "mu", "sigma", "output"};
const std::vector<std::string> kLatticeKeys = {"pi",  "xi",          "x0",   "steps",       "horizon",
                                               "up_prob", "calibration", "tail", "consumption", "gamma",
                                               "sigma_step", "tau_step"};

std::vector<std::string> join(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

struct Command {
  std::string name;
  std::string help;
  std::vector<std::string> keys;
  std::function<void(const RunConfig&, Table&, std::ostream&)> body;
};

std::vector<Command> commands() {
  return {
      {"params", "derived preference and market constants", join(kMarketKeys, {"pi", "xi"}),
       [](const RunConfig& c, Table& t, std::ostream&) { cmd_params(c, t); }},
      {"optimize", "optimal constant proportional strategy", join(kMarketKeys, {"x0"}),
       [](const RunConfig& c, Table& t, std::ostream&) { cmd_optimize(c, t); }},
      {"family", "improper family profile A(t)",
       join(kMarketKeys, {"pi", "xi", "A0", "T", "t_max", "points", "fd_step"}),
       [](const RunConfig& c, Table& t, std::ostream&) { cmd_family(c, t); }},
      {"solve-lattice", "backward induction on the lattice", join(kMarketKeys, kLatticeKeys),
       cmd_solve_lattice},
      {"fixed-point", "Picard iteration with order certificate",
       join(join(kMarketKeys, kLatticeKeys), {"epsilon", "nu", "tol", "max_iter", "substeps"}),
       cmd_fixed_point},
      {"classify", "residual, properness and CRRA order of a W CSV",
       join(join(kMarketKeys, kLatticeKeys), {"input"}), cmd_classify},
      {"mc-verify", "Monte Carlo residual of a closed-form candidate",
       join(kMarketKeys, {"pi", "xi", "x0", "steps", "horizon", "paths", "seed", "candidate",
                          "scale", "A0", "T"}),
       [](const RunConfig& c, Table& t, std::ostream&) { cmd_mc_verify(c, t); }},
  };
}

// Per-command defaults that differ from the global ones.
std::map<std::string, std::string> command_defaults(const std::string& name) {
  if (name == "mc-verify") return {{"steps", "100"}};
  return {};
}

int report(const Error& e, std::ostream& err) {
  err << "ERROR:" << to_string(e.code()) << ":" << e.what() << '\n';
  return is_numerical_failure(e.code()) ? 2 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& env) {
  CLI::App app{"Epstein-Zin SDU laboratory"};
  app.require_subcommand(1);
  const std::vector<Command> cmds = commands();
  std::map<std::string, std::map<std::string, std::string>> flag_store;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, CLI::App*> subs;
  for (const Command& cmd : cmds) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    subs[cmd.name] = sub;
    sub->add_option("--config", config_paths[cmd.name], "key=value config file");
    for (const std::string& key : cmd.keys) {
      const KeyInfo* info = find_key(key);
      sub->add_option(flag_name(key), flag_store[cmd.name][key], info ? info->help : key);
    }
  }

  std::vector<const char*> argv;
  argv.push_back("ezsdu");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ERROR:CONFIG:" << e.what() << '\n';
    return 1;
  }

  try {
    for (const Command& cmd : cmds) {
      CLI::App* sub = subs[cmd.name];
      if (!sub->parsed()) continue;
      std::map<std::string, std::string> flags;
      for (const std::string& key : cmd.keys) {
        if (sub->count(flag_name(key)) > 0) flags[key] = flag_store[cmd.name][key];
      }
      std::map<std::string, std::string> file;
      for (const auto& [key, value] : command_defaults(cmd.name)) file[key] = value;
      if (!config_paths[cmd.name].empty()) {
        for (const auto& [key, value] : read_config_file(config_paths[cmd.name])) file[key] = value;
      }
      const RunConfig config = resolve(cmd.keys, file, env, flags);
      Table table(cmd.name, config);
      cmd.body(config, table, err);
      const std::string& target = config.text("output");
      if (target == "-") {
        table.write(out);
      } else {
        std::ofstream file_out(target);
        if (!file_out) config_error("cannot write output " + target);
        table.write(file_out);
      }
      return 0;
    }
    return 0;
  } catch (const Error& e) {
    return report(e, err);
  } catch (const std::exception& e) {
    err << "ERROR:INTERNAL:" << e.what() << '\n';
    return 1;
  }
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, out, err, [](const std::string& name) { return std::getenv(name.c_str()); });
}

}  // namespace ezsdu::cli

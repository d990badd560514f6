#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ezsdu/error.hpp"

namespace ezsdu::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorCode::Config, message);
}

}  // namespace

const std::vector<KeyInfo>& known_keys() {
  static const std::vector<KeyInfo> keys = {
      {"R", std::nullopt, "relative risk aversion"},
      {"S", std::nullopt, "elasticity of intertemporal complementarity"},
      {"r", std::nullopt, "risk-free rate"},
      {"mu", std::nullopt, "risky drift"},
      {"sigma", std::nullopt, "volatility"},
      {"pi", std::nullopt, "risky fraction (default: optimal)"},
      {"xi", std::nullopt, "consumption rate (default: optimal)"},
      {"x0", "1", "initial wealth"},
      {"steps", "200", "lattice or path time steps"},
      {"horizon", "50", "lattice or path horizon"},
      {"up_prob", "0.5", "lattice up probability"},
      {"calibration", "power", "lattice calibration: power|log"},
      {"tail", "proportional", "lattice tail: zero|proportional"},
      {"consumption", "proportional", "consumption: proportional|indicator"},
      {"gamma", "1", "indicator discount rate"},
      {"sigma_step", "0", "indicator start step"},
      {"tau_step", "none", "indicator stop step or none"},
      {"epsilon", "0", "perturbation size"},
      {"nu", "0", "perturbation exponential rate"},
      {"tol", "1e-12", "Picard tolerance"},
      {"max_iter", "1000", "Picard iteration cap"},
      {"substeps", "8", "RK4 substeps per lattice step"},
      {"A0", std::nullopt, "family initial value"},
      {"T", std::nullopt, "family absorption time (alternative to A0)"},
      {"t_max", std::nullopt, "family grid end (default: 1.25 T or 4 theta/H)"},
      {"points", "201", "family grid points"},
      {"fd_step", std::nullopt, "finite-difference step (default 1e-4 theta/H)"},
      {"paths", "100000", "Monte Carlo paths"},
      {"seed", "1", "Monte Carlo seed"},
      {"candidate", "proportional", "Monte Carlo candidate: proportional|family"},
      {"scale", "1", "multiplier on the candidate coefficient"},
      {"input", std::nullopt, "W CSV written by solve-lattice"},
      {"output", "-", "output path, '-' for stdout"},
  };
  return keys;
}

const KeyInfo* find_key(const std::string& name) {
  for (const KeyInfo& k : known_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::string flag_name(const std::string& key) {
  std::string flag = key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return "--" + flag;
}

std::string env_name(const std::string& key) { return "EZSDU_" + key; }

void RunConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

const std::string& RunConfig::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) config_error("missing key " + key);
  return it->second;
}

double RunConfig::number(const std::string& key) const {
  const std::string& raw = text(key);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(raw.c_str(), &end);
  if (raw.empty() || end != raw.c_str() + raw.size() || errno == ERANGE || !std::isfinite(v)) {
    config_error("key " + key + " is not a finite number: '" + raw + "'");
  }
  return v;
}

int RunConfig::integer(const std::string& key) const {
  const double v = number(key);
  if (v != std::floor(v) || std::abs(v) > 2e9) {
    config_error("key " + key + " is not an integer: '" + text(key) + "'");
  }
  return static_cast<int>(v);
}

std::optional<double> RunConfig::optional_number(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return number(key);
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      config_error("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!find_key(key)) config_error("unknown key '" + key + "'");
    if (value.empty()) config_error("key " + key + " has an empty value");
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

RunConfig resolve(std::span<const std::string> keys, const std::map<std::string, std::string>& file,
                  const std::function<const char*(const std::string&)>& getenv,
                  const std::map<std::string, std::string>& flags) {
  for (const auto& [key, value] : file) {
    if (!find_key(key)) config_error("unknown key '" + key + "'");
  }
  RunConfig config;
  for (const std::string& key : keys) {
    const KeyInfo* info = find_key(key);
    if (!info) config_error("unknown key '" + key + "'");
    if (info->default_value) config.set(key, *info->default_value);
    if (const auto it = file.find(key); it != file.end()) config.set(key, it->second);
    if (const char* env = getenv(env_name(key))) config.set(key, env);
    if (const auto it = flags.find(key); it != flags.end()) config.set(key, it->second);
  }
  for (const auto& [key, value] : flags) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      config_error("key '" + key + "' does not apply here");
    }
  }
  return config;
}

}  // namespace ezsdu::cli

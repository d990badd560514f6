#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ezsdu::cli {

/// A recognised configuration key. Flags are --name with '_' spelled '-';
/// the environment override is EZSDU_<name> with the name verbatim.
struct KeyInfo {
  std::string name;
  std::optional<std::string> default_value;
  std::string help;
};

const std::vector<KeyInfo>& known_keys();
const KeyInfo* find_key(const std::string& name);
std::string flag_name(const std::string& key);
std::string env_name(const std::string& key);

/// Resolved key=value pairs. Getters throw Error(Config) on missing or
/// malformed values.
class RunConfig {
 public:
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& text(const std::string& key) const;
  double number(const std::string& key) const;
  int integer(const std::string& key) const;
  std::optional<double> optional_number(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Parses "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::string& path);

/// Layering for the given keys: defaults, then file, then environment,
/// then flags. Keys outside `keys` are rejected when they come from the
/// file unless they are known to some subcommand.
RunConfig resolve(std::span<const std::string> keys, const std::map<std::string, std::string>& file,
                  const std::function<const char*(const std::string&)>& getenv,
                  const std::map<std::string, std::string>& flags);

}  // namespace ezsdu::cli

#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace ezsdu::cli {

using EnvLookup = std::function<const char*(const std::string&)>;

/// Runs one subcommand. Returns 0 on success, 1 for rejected input and 2
/// for a numerical failure; errors go to `err` as "ERROR:<CODE>:<message>".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& env);

/// Same with the process environment.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ezsdu::cli

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tumornet/core/error.hpp"

namespace tumornet::cli {

enum ExitCode : int { exit_ok = 0, exit_other = 1, exit_config = 2, exit_data = 3, exit_numerical = 4 };

int exit_code(ErrorCategory c);

// Parses `args` (without the program name) and runs one command. Errors are
// reported on `err` and turned into an exit code; nothing is thrown.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

// Fully resolved configuration of a command: defaults from the preset, the
// config file on top, then command line flags. Written next to the outputs as
// resolved_config.json; feeding that file back through --config reproduces
// the run.
nlohmann::json resolve_config(const std::string& command, const nlohmann::json& file, const nlohmann::json& flags);

struct SelftestCheck {
  std::string module;
  std::string name;
  bool pass = false;
  std::string detail;
};

// Quick closed-form checks for every module, each a few milliseconds.
std::vector<SelftestCheck> run_selftest();

}  // namespace tumornet::cli

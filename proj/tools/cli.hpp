#pragma once

// Command-line front end: validated commands, dispatch and report output.

#include <json.hpp>
#include <ostream>
#include <string>
#include <vector>

namespace randqe::cli {

enum class Format { Json, Text };

struct Command {
  std::string subcommand;  // eval, qe, qe-apa, iso, check
  std::string structure = "pureset";
  std::string signature_path;  // qe: parse against a signature file instead
  std::string formula;
  std::vector<std::string> assign;
  std::string eps = "1/16";
  unsigned mesh = 8;
  std::size_t max_m = 4;
  std::string flavor = "apa";
  std::string pres1 = "std";
  std::string pres2 = "std";
  std::size_t steps = 8;
  unsigned prec = 6;
  std::vector<int> criteria;  // check: empty runs all
  bool timing = false;
  Format format = Format::Json;
};

/// Exit codes.
enum : int { kOk = 0, kSuiteFailure = 1, kUsage = 2, kResourceCap = 3 };

struct Report {
  nlohmann::ordered_json body;
  int exit_code = kOk;
};

/// Throws PreconditionError when the command is not valid.
void validate(const Command& cmd);
/// Dispatches a valid command. Errors from the modules propagate.
Report execute(const Command& cmd);
/// Error report for an exception escaping execute, with its exit code.
Report error_report(const std::exception& e);
std::string emit_report(const Report& r, Format format);

/// Parses argv, runs and prints; returns the exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace randqe::cli

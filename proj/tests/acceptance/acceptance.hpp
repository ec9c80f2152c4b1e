#pragma once

// Acceptance criteria 1-10 as runnable checks with independent oracles. Shared
// by the acceptance binary and the `check` subcommand of the CLI.

#include <json.hpp>
#include <string>
#include <vector>

namespace acceptance {

struct Result {
  int id = 0;
  std::string title;
  bool pass = true;
  std::size_t instances = 0;
  std::vector<std::string> failures;  // the first few only
  std::size_t failure_count = 0;
  std::string note;
  double seconds = 0;

  /// Counts one checked instance; records `what` when it fails.
  void expect(bool ok, const std::string& what);
  /// Fails the criterion without counting an instance.
  void fail(const std::string& what);
};

struct Criterion {
  int id;
  std::string title;
  Result (*run)();
};

const std::vector<Criterion>& criteria();

/// Runs one criterion, converting escaped exceptions into failures and
/// filling in the timing.
Result run(const Criterion& c);

/// Stable field order; `seconds` only when asked for.
nlohmann::ordered_json to_json(const Result& r, bool timing = false);

// Criterion bodies.
Result event_algebra_laws();
Result formula_measure_oracle();
Result fullness();
Result near_realization();
Result claimdef_modulus();
Result apa_qe();
Result randomization_qe();
Result decidability_transfer();
Result back_and_forth();
Result restricted_calculus();

}  // namespace acceptance

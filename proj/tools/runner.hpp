#pragma once

// Executes scenario tasks and writes the run manifest.

#include "scenario.hpp"

#include <iosfwd>

namespace modaff::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitSchema = 2,
  kExitAdmissibility = 3,
  kExitRefusal = 4,
  kExitCompareFailed = 5,
};

struct RunOptions {
  std::optional<std::string> out_dir;      // replaces the scenario's output
  std::optional<std::uint64_t> seed;       // replaces the scenario's seed
  std::optional<int> threads;
  std::ostream* log = nullptr;             // one progress line per task
};

struct Artifact {
  std::string task;
  std::string file;     // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunResult {
  int exit_code = kExitOk;
  std::string out_dir;
  std::vector<Artifact> artifacts;
  std::string manifest_path;
};

/// Runs the tasks in order. Library exceptions propagate; a compare task whose
/// worst |z| reaches its limit sets exit_code to kExitCompareFailed.
RunResult run_scenario(const Scenario& s, const RunOptions& opt);

/// Loads, runs and maps every failure to its exit code, printing a diagnostic.
int run_file(const std::string& path, const RunOptions& opt, std::ostream& log, std::ostream& err);

}  // namespace modaff::cli

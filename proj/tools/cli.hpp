// Command implementations behind the iscc executable.
#pragma once

#include "iscc/evalsim.hpp"
#include "iscc/oracle.hpp"
#include "iscc/scenarios.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace iscc::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kOutputSchemaVersion = 1;

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kInfeasible = 3,
  kNonConvergence = 4,
  kVerificationFailure = 5,
};

struct SolveOptions {
  std::filesystem::path config;  // empty: defaults
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
  Scheme scheme = Scheme::optimal;
};

struct SweepOptions {
  std::filesystem::path spec;
  std::filesystem::path out;
  int parallel = 1;
  bool record_timing = false;
};

struct VerifyOptions {
  std::filesystem::path out;
  int parallel = 1;
  int max_devices = 2;
  int scenarios = 10;  // seeds per matrix cell
  std::uint64_t seed = 0;
  std::optional<double> step_size;  // overrides every dual step scale
  GridSpec grid;
};

/// One solver-vs-oracle comparison.
struct VerifyCell {
  int devices = 0, classes = 0, features = 0;
  std::uint64_t seed = 0;
  Termination termination = Termination::converged;
  double solver_gain = 0.0;
  double oracle_gain = 0.0;
  double relative_gap = 0.0;
  double stationarity = 0.0;
  double slackness = 0.0;
  bool feasible = false;
  bool pass = false;
  std::string note;
};

/// Scenario configuration of a verification cell: the defaults with K
/// devices, L classes, N features and the latency budget scaled with K.
ScenarioConfig verify_config(int devices, int classes, int features);

VerifyCell verify_cell(int devices, int classes, int features, std::uint64_t seed,
                       const SolverConfig& solver, const GridSpec& grid);

int cmd_solve(const SolveOptions& opt, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err);

/// Parses arguments and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace iscc::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "zilm/fit.hpp"
#include "zilm/simulate.hpp"

namespace zilm {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// Environment variable naming the default output root.
inline constexpr const char* kOutRootEnv = "ZILM_OUT_ROOT";

/// Written as run_manifest.json next to every command's outputs.
struct RunManifest {
  std::string command;
  std::string config_digest;  // SHA-256 of the consumed config bytes
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;  // relative to the output directory
  std::string tool_version{kToolVersion};
  double wall_seconds = 0.0;
};

void write_run_manifest(const std::filesystem::path& dir, const RunManifest& m);

struct ReproduceOptions {
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  bool quick = false;  // 500 students
  bool force = false;
};

/// simulate -> fit irt, irt_zilm, ktm1 -> every report -> summary.csv.
/// Errors are rethrown with the failing stage prepended.
RunManifest cmd_reproduce(const ReproduceOptions& opts, std::ostream& log);

/// Entry point of the `zilm` tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace zilm

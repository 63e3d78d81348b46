#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvlab/config.hpp"

namespace mvlab {

inline constexpr const char* kVersion = "1.0.0";

/// Process exit statuses of the batch front end.
enum ExitCode : int { kExitOk = 0, kExitConfig = 64, kExitAssertion = 65, kExitBlowUp = 70 };

struct RunOptions {
  std::vector<std::string> overrides;
  /// Takes precedence over MVLAB_OUTPUT_DIR and the config's output_dir.
  std::string output_dir;
  int threads = 0;  ///< 0 leaves the OpenMP default
  std::ostream* log = nullptr;
};

struct ExperimentOutcome {
  std::string name;
  std::string type;
  std::string status = "ok";  ///< ok | assertion_failed | blow_up | config_error
  std::string message;
  std::vector<std::string> files;  ///< relative to the output directory
};

struct RunResult {
  int exit_code = kExitOk;
  std::filesystem::path output_dir;
  std::filesystem::path manifest_path;
  nlohmann::json manifest;
  std::vector<ExperimentOutcome> experiments;
};

/// Seed of the named experiment's stream lane.
std::uint64_t experiment_seed(std::uint64_t master_seed, const std::string& name);

/// Runs every experiment of an already parsed config into `output_dir` and
/// writes manifest.json. `config_path` is recorded for replay.
RunResult run_config(const RunConfig& config, const std::filesystem::path& config_path,
                     const std::filesystem::path& output_dir, const RunOptions& opts);

/// `run <config>`; configuration errors map to kExitConfig.
int run_command(const std::filesystem::path& config_path, const RunOptions& opts);

/// `check <config>`: parse and validate only.
int check_command(const std::filesystem::path& config_path, const RunOptions& opts);

struct ReplayResult {
  int exit_code = kExitOk;
  bool config_hash_match = false;
  /// One entry per file whose hash differs or that is missing on one side.
  std::vector<std::string> diff;
  std::filesystem::path output_dir;
};

/// Re-runs the manifest's config and overrides into `output_dir` (default
/// <manifest dir>/replay) and compares every recorded output hash.
ReplayResult replay(const std::filesystem::path& manifest_path, const RunOptions& opts);

/// `replay <manifest>`; mismatches map to kExitAssertion, an edited config
/// to kExitConfig.
int replay_command(const std::filesystem::path& manifest_path, const RunOptions& opts);

}  // namespace mvlab

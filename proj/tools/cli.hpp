#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace awd::cli {

struct RunManifest {
  std::string command;
  std::filesystem::path config_path;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::vector<std::string> artifacts;  // relative to out_dir
  std::vector<std::pair<std::string, double>> timings;  // wall-clock seconds per stage
};

struct CommandOptions {
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
};

/// Runs one verb (gen, train-teacher, distill, eval, peakcount, bench) and
/// writes manifest.json into the output directory.
RunManifest run_command(const std::string& command, const CommandOptions& options);

/// Full command-line entry point. Returns the process exit code:
/// 0 success, 1 other error, 2 usage or config error, 3 failed precondition,
/// 4 divergence. Errors are reported on `err` as one JSON object.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline constexpr const char* kManifestFile = "manifest.json";

}  // namespace awd::cli

#pragma once

#include "rtk/io.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace rtk::cli {

// Everything a run depends on. `params` holds input paths and per-command
// arguments, `config` the fully resolved configuration section.
struct Request {
  std::string command;
  Json params = Json::object();
  Json config = Json::object();
  std::uint64_t seed = 0;
};

struct OutputFile {
  std::string name;
  std::function<void(const std::filesystem::path&)> write;
};

struct RunResult {
  std::vector<OutputFile> files;
  std::vector<std::filesystem::path> inputs;
  std::string summary;
};

std::vector<std::string> command_names();

// Merges the config file section and flag overrides over the defaults and
// returns the resolved snapshot. Commands without a config section get {}.
Json resolve_config(const std::string& command, const Json& file_section, const Json& overrides);

// Runs a command entirely in memory; nothing touches disk until the
// returned writers are invoked.
RunResult execute(const Request& request);

struct RunRecord {
  std::vector<std::string> argv;
  std::string started_at;
  std::string replay_of;
};

// Writes every output and a manifest.json describing the run. Returns the
// manifest.
Json write_run(const Request& request, const RunResult& result, const std::filesystem::path& out_dir,
               const RunRecord& record);

struct ReplayOutcome {
  Json manifest;
  std::vector<std::string> mismatched;
  bool identical() const {
    return mismatched.empty();
  }
};

// Re-executes a manifest into out_dir and compares output digests.
ReplayOutcome replay(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                     const RunRecord& record);

std::string utc_timestamp();

} // namespace rtk::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace wqed {

inline const std::vector<std::string> kCommands{"spectral", "bound", "design", "fdtd", "validate"};

struct CommandContext {
  nlohmann::json config = nlohmann::json::object();
  std::filesystem::path out_dir = ".";
  int threads = 0;  // 0: OpenMP default
  std::optional<std::uint64_t> seed;
};

// A run manifest ({"command", "config", ...}) is accepted in place of a config;
// its embedded config is used. Returns the command named in a manifest, if any.
std::optional<std::string> unwrap_manifest(nlohmann::json& config);

// Runs one command and writes its files plus manifest.json into out_dir.
// Returns the process exit code: 0 ok, 2 config error, 3 numerical failure,
// 4 invariant breach (including a failed validation suite).
int run_command(const std::string& name, const CommandContext& ctx);

}  // namespace wqed

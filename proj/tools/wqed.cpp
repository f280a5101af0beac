#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "wqed/commands.hpp"
#include "wqed/errors.hpp"
#include "wqed/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Waveguide QED bound states, two-photon trapping and time-domain checks"};
  std::string command, config_path, out_dir = "out";
  int threads = 0;
  std::uint64_t seed = 0;
  app.add_option("command", command, "spectral | bound | design | fdtd | validate")
      ->required()
      ->check(CLI::IsMember(wqed::kCommands));
  app.add_option("--config", config_path, "JSON config or a manifest.json from an earlier run");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "OpenMP threads (0: default)")->check(CLI::NonNegativeNumber);
  auto* seed_opt = app.add_option("--seed", seed, "seed for randomized suites and packets");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  wqed::CommandContext ctx;
  ctx.out_dir = out_dir;
  ctx.threads = threads;
  if (seed_opt->count()) ctx.seed = seed;
  if (!config_path.empty()) {
    try {
      ctx.config = wqed::io::read_json(config_path);
    } catch (const wqed::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
    if (auto cmd = wqed::unwrap_manifest(ctx.config); cmd && *cmd != command) {
      std::cerr << "config error: manifest was written by '" << *cmd << "', not '" << command
                << "'\n";
      return 2;
    }
  }
  return wqed::run_command(command, ctx);
}

#include <CLI11.hpp>

#include <iostream>

#include "phimin/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"phimin: weighted minimal surfaces, solvers and audits"};
  std::string command, config_path, out_dir;
  std::uint64_t seed = 0;
  bool verbose = false;
  app.add_option("command", command, "Command to run (must match the config when it names one)")->required();
  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--out", out_dir, "Output directory (overrides the config)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for randomized trial functions (overrides the config)");
  app.add_flag("--verbose", verbose, "Print the reports");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  phimin::RunConfig cfg;
  try {
    cfg = phimin::parse_config(phimin::read_file(config_path));
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  if (phimin::to_string(cfg.command) != command) {
    std::cerr << "command " << command << " does not match the config command " << phimin::to_string(cfg.command) << '\n';
    return 2;
  }
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (*seed_opt) cfg.seed = seed;

  std::string err;
  const auto t0 = std::chrono::steady_clock::now();
  int code = 2;
  try {
    phimin::RunOutcome o = phimin::execute(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    phimin::write_outputs(cfg, o, secs);
    code = o.exit_code;
    if (verbose) std::cout << phimin::reports_json(o.reports);
    std::cout << phimin::to_string(cfg.command) << ": " << (code == 0 ? "passed" : "audit failed") << ", "
              << o.artifacts.size() << " artifacts in " << cfg.output_dir << '\n';
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    code = 2;
  }
  return code;
}

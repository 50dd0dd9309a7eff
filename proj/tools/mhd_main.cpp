#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "mhd/harness.hpp"

namespace {

using mhd::harness::RunConfig;

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  long seed = -1;
  int threads = 0;
};

RunConfig load_config(const GlobalOpts& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{}
                                           : RunConfig::from_json_file(opts.config_path);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.seed >= 0) cfg.seed = static_cast<unsigned long>(opts.seed);
  if (opts.threads > 0) cfg.threads = opts.threads;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compressible viscous MHD simulator and relative-energy toolkit"};
  app.require_subcommand(1);

  GlobalOpts opts;
  app.add_option("--config", opts.config_path, "JSON run configuration");
  app.add_option("--out", opts.out_dir, "output directory (overrides config)");
  app.add_option("--seed", opts.seed, "RNG seed (overrides config)");
  app.add_option("--threads", opts.threads, "worker threads (overrides config)");

  app.add_subcommand("eos-check", "verify thermodynamic identities of the configured EOS");
  app.add_subcommand("simulate", "run the configured scenario and write diagnostics");

  auto* relent = app.add_subcommand(
      "relent", "amplitude sweep of the relative-energy inequality");
  std::string reference = "equilibrium";
  relent->add_option("--reference", reference, "comparison solution: equilibrium|fine")
      ->check(CLI::IsMember({"equilibrium", "fine"}));

  auto* dmv = app.add_subcommand("dmv-audit", "weak-form audit of an ensemble measure");
  int ensemble = 4;
  dmv->add_option("--ensemble", ensemble, "number of ensemble members")
      ->check(CLI::PositiveNumber);

  auto* kp = app.add_subcommand("kp-check", "Korn-Poincare ratio sweep");
  int sweep = 16;
  kp->add_option("--sweep", sweep, "number of random field pairs")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = load_config(opts);
    if (app.got_subcommand("eos-check")) return mhd::harness::cmd_eos_check(cfg);
    if (app.got_subcommand("simulate")) return mhd::harness::cmd_simulate(cfg);
    if (app.got_subcommand("relent")) return mhd::harness::cmd_relent(cfg, reference);
    if (app.got_subcommand("dmv-audit")) return mhd::harness::cmd_dmv_audit(cfg, ensemble);
    if (app.got_subcommand("kp-check")) return mhd::harness::cmd_kp_check(cfg, sweep);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

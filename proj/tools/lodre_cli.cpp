// Experiment runner: convergence studies of FEM and LOD discretizations of
// LQR Riccati equations with multiscale diffusion.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "lodre/experiment.hpp"

namespace {

void print_orders(const char* label, const std::vector<double>& orders) {
  std::printf("  %-8s", label);
  for (double o : orders) std::printf(" %7.3f", o);
  std::printf("\n");
}

int run(const std::string& path, bool verbose) {
  lodre::ExperimentConfig cfg = lodre::load_config(path);
  if (verbose) cfg.solver.log = &std::cerr;
  const auto record = lodre::run_experiment(cfg, &std::cerr);
  std::printf("%-10s %8s %4s %14s %14s %14s %14s %6s\n", "H", "n", "k", "L2 fem",
              "L2 lod", "V fem", "V lod", "rank");
  for (const auto& r : record.levels) {
    std::printf("%-10.6g %8d %4d %14.6e %14.6e %14.6e %14.6e %6d\n", r.H, r.n_coarse,
                r.k, r.err_L2_fem, r.err_L2_lod, r.err_V_fem, r.err_V_lod, r.rank_final);
  }
  if (!record.order_L2_lod.empty()) {
    std::printf("observed orders:\n");
    print_orders("L2 fem", record.order_L2_fem);
    print_orders("L2 lod", record.order_L2_lod);
    print_orders("V fem", record.order_V_fem);
    print_orders("V lod", record.order_V_lod);
  }
  if (!cfg.output.empty()) std::printf("wrote %s\n", cfg.output.c_str());
  return 0;
}

int presets() {
  for (const auto& name : lodre::preset_names()) {
    const auto cfg = lodre::preset_config(name);
    std::printf("%-14s levels %d..%d, reference level %d\n", name.c_str(), cfg.j_min,
                cfg.j_max, cfg.j_ref);
  }
  return 0;
}

int dump_kappa(const std::string& path, const std::string& out) {
  const auto cfg = lodre::load_config(path);
  const auto kappa = lodre::make_kappa(cfg);
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write '" + out + "'");
  kappa.write(os);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LOD / FEM Riccati convergence benchmark"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  bool verbose = false;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a config file");
  run_cmd->add_option("config", config, "Config file")->required();
  run_cmd->add_flag("-v,--verbose", verbose, "Per-step solver log on stderr");
  auto* presets_cmd = app.add_subcommand("presets", "List built-in presets");
  auto* dump_cmd = app.add_subcommand("dump-kappa", "Write the coefficient grid");
  dump_cmd->add_option("config", config, "Config file")->required();
  dump_cmd->add_option("out", out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run_cmd) return run(config, verbose);
    if (*presets_cmd) return presets();
    if (*dump_cmd) return dump_kappa(config, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "lodre: %s\n", e.what());
    return 1;
  }
  return 0;
}

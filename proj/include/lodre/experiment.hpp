#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lodre/assembly.hpp"
#include "lodre/dre.hpp"
#include "lodre/mesh.hpp"

namespace lodre {

enum class Preset { Grid, LShape, Stripes, Custom };

struct KappaSpec {
  enum class Type { RandomGrid, Stripes };
  Type type = Type::RandomGrid;
  double epsilon = 1.0 / 32.0;
  double lo = 1e-3;
  double hi = 1.0;
  std::uint64_t seed = 1;
  int n_stripes = 7;
  double width = 1.0 / 32.0;
  double background = 1.0;
  double stripe_value = 1e-2;
};

struct ExperimentConfig {
  std::string name = "grid";
  Preset preset = Preset::Grid;
  DomainKind domain = DomainKind::UnitSquare;
  KappaSpec kappa;
  /// Control squares; one input column each.
  std::vector<Square> inputs;
  /// Output averaging square; empty means the integral over the domain.
  std::vector<Square> output_region;
  int j_min = 0;
  int j_max = 3;
  int j_ref = 5;
  /// Patch radius; 0 selects ceil(log2(1/H)) per level.
  int k = 0;
  SolverConfig solver;
  std::string output = "results.csv";
  bool record_timings = true;
  int threads = 1;

  void validate() const;
};

std::vector<std::string> preset_names();
/// Built-in configurations: grid, lshape, stripes (desk scale) and their
/// *-paper variants.
ExperimentConfig preset_config(const std::string& name);

/// INI-style `key = value` lines under [experiment], [kappa] and [solver];
/// `preset` selects the defaults that the remaining keys override.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

Domain make_domain(DomainKind kind);
CoefficientField make_kappa(const ExperimentConfig& cfg);
/// Fine-scale LQR matrices on the non-Dirichlet nodes of `mesh`.
LqrSystem assemble_system(const TriMesh& mesh, const ExperimentConfig& cfg,
                          const CoefficientField& kappa);
/// Coarse system through triple products with the prolongation.
LqrSystem restrict_system(const LqrSystem& fine, const SparseMatrix& prolongation);

struct LevelRecord {
  int level = 0;
  double H = 0.0;
  int n_coarse = 0;
  int k = 0;
  double err_L2_fem = 0.0;
  double err_L2_lod = 0.0;
  double err_V_fem = 0.0;
  double err_V_lod = 0.0;
  double time_lod_setup = 0.0;
  double time_solve_fem = 0.0;
  double time_solve_lod = 0.0;
  int rank_final = 0;
};

struct ConvergenceRecord {
  std::vector<LevelRecord> levels;
  int n_reference = 0;
  int rank_reference = 0;
  double time_reference = 0.0;
  std::vector<double> order_L2_fem;
  std::vector<double> order_L2_lod;
  std::vector<double> order_V_fem;
  std::vector<double> order_V_lod;
};

/// log2(e_j / e_{j+1}) / log2(H_j / H_{j+1}) for consecutive entries.
std::vector<double> observed_order(const std::vector<double>& errors,
                                   const std::vector<double>& H);

/// Runs the reference solve and, per coarse level, the FEM and LOD solves and
/// both error norms. Writes the CSV (flushed per level) unless
/// `cfg.output` is empty; progress lines go to `log` when given.
ConvergenceRecord run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

void write_csv_metadata(std::ostream& os, const ExperimentConfig& cfg);
void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const LevelRecord& row);

}  // namespace lodre

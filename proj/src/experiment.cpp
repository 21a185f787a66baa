#include "lodre/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "lodre/lod.hpp"
#include "lodre/norms.hpp"

namespace lodre {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const char* preset_label(Preset p) {
  switch (p) {
    case Preset::Grid: return "grid";
    case Preset::LShape: return "lshape";
    case Preset::Stripes: return "stripes";
    case Preset::Custom: return "custom";
  }
  return "custom";
}

const char* domain_label(DomainKind d) {
  switch (d) {
    case DomainKind::UnitSquare: return "unit_square";
    case DomainKind::LShape: return "l_shape";
    case DomainKind::UShape: return "u_shape";
  }
  return "unit_square";
}

std::vector<Square> grid_inputs() {
  std::vector<Square> squares;
  for (int j = 1; j <= 3; ++j) squares.push_back({j / 4.0, j / 4.0, 1.0 / 8.0});
  return squares;
}

}  // namespace

void ExperimentConfig::validate() const {
  solver.validate();
  if (j_min < 0 || j_max < j_min)
    throw std::invalid_argument("config: need 0 <= j_min <= j_max");
  if (j_ref <= j_max) throw std::invalid_argument("config: need j_ref > j_max");
  if (k < 0) throw std::invalid_argument("config: k must be >= 0 (0 = auto)");
  if (inputs.empty()) throw std::invalid_argument("config: at least one input square");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
}

std::vector<std::string> preset_names() {
  return {"grid", "lshape", "stripes", "grid-paper", "lshape-paper", "stripes-paper"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.name = name;
  const bool paper = name.size() > 6 && name.substr(name.size() - 6) == "-paper";
  const std::string base = paper ? name.substr(0, name.size() - 6) : name;
  if (base == "grid") {
    cfg.preset = Preset::Grid;
    cfg.domain = DomainKind::UnitSquare;
    cfg.kappa.type = KappaSpec::Type::RandomGrid;
    cfg.inputs = grid_inputs();
  } else if (base == "stripes") {
    cfg.preset = Preset::Stripes;
    cfg.domain = DomainKind::UnitSquare;
    cfg.kappa.type = KappaSpec::Type::Stripes;
    cfg.inputs = grid_inputs();
  } else if (base == "lshape") {
    cfg.preset = Preset::LShape;
    cfg.domain = DomainKind::LShape;
    cfg.kappa.type = KappaSpec::Type::RandomGrid;
    cfg.inputs = {{0.65, 0.65, 0.2}};
    cfg.output_region = {{0.15, 0.15, 0.2}};
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  if (paper) {
    cfg.kappa.epsilon = 1.0 / 128.0;
    cfg.kappa.width = 1.0 / 128.0;
    cfg.j_min = 0;
    cfg.j_max = 6;
    cfg.j_ref = 7;
  } else if (cfg.preset == Preset::LShape) {
    // The L-shape base mesh is one level finer than the unit square's.
    cfg.j_max = 2;
    cfg.j_ref = 4;
  }
  cfg.output = name + ".csv";
  return cfg;
}

namespace {

Preset parse_preset_kind(const std::string& s) {
  if (s == "grid") return Preset::Grid;
  if (s == "lshape") return Preset::LShape;
  if (s == "stripes") return Preset::Stripes;
  if (s == "custom") return Preset::Custom;
  throw std::invalid_argument("unknown preset kind '" + s + "'");
}

DomainKind parse_domain(const std::string& s) {
  if (s == "unit_square") return DomainKind::UnitSquare;
  if (s == "l_shape") return DomainKind::LShape;
  if (s == "u_shape") return DomainKind::UShape;
  throw std::invalid_argument("unknown domain '" + s + "'");
}

// "x0 y0 side; x0 y0 side; ..."
std::vector<Square> parse_squares(const std::string& s) {
  std::vector<Square> result;
  std::stringstream all(s);
  std::string item;
  while (std::getline(all, item, ';')) {
    std::istringstream one(item);
    Square sq;
    if (!(one >> sq.x0)) continue;
    if (!(one >> sq.y0 >> sq.side) || !(sq.side > 0.0))
      throw std::invalid_argument("malformed square '" + item + "'");
    result.push_back(sq);
  }
  return result;
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  if (!(is >> v) || !(is >> std::ws).eof())
    throw std::invalid_argument("bad value for '" + key + "': '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("bad value for '" + key + "': '" + text + "'");
}

}  // namespace

ExperimentConfig parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.message() + " at line " +
                                std::to_string(e.line()));
  }

  const std::string preset = tree.get<std::string>("experiment.preset", "grid");
  ExperimentConfig cfg = preset_config(preset);

  const std::set<std::string> sections{"experiment", "kappa", "solver"};
  for (const auto& [section, body] : tree) {
    if (!sections.count(section))
      throw std::invalid_argument("config: unknown section [" + section + "]");
    for (const auto& [key, node] : body) {
      const std::string v = node.get_value<std::string>();
      const std::string full = section + "." + key;
      if (section == "experiment") {
        if (key == "preset") continue;
        if (key == "name") cfg.name = v;
        else if (key == "kind") cfg.preset = parse_preset_kind(v);
        else if (key == "domain") cfg.domain = parse_domain(v);
        else if (key == "inputs") cfg.inputs = parse_squares(v);
        else if (key == "output_region") cfg.output_region = parse_squares(v);
        else if (key == "j_min") cfg.j_min = parse_value<int>(full, v);
        else if (key == "j_max") cfg.j_max = parse_value<int>(full, v);
        else if (key == "j_ref") cfg.j_ref = parse_value<int>(full, v);
        else if (key == "k") cfg.k = v == "auto" ? 0 : parse_value<int>(full, v);
        else if (key == "output") cfg.output = v;
        else if (key == "timings") cfg.record_timings = parse_bool(full, v);
        else if (key == "threads") cfg.threads = parse_value<int>(full, v);
        else throw std::invalid_argument("config: unknown key '" + full + "'");
      } else if (section == "kappa") {
        if (key == "type") {
          if (v == "random") cfg.kappa.type = KappaSpec::Type::RandomGrid;
          else if (v == "stripes") cfg.kappa.type = KappaSpec::Type::Stripes;
          else throw std::invalid_argument("config: unknown kappa type '" + v + "'");
        }
        else if (key == "epsilon") cfg.kappa.epsilon = parse_value<double>(full, v);
        else if (key == "lo") cfg.kappa.lo = parse_value<double>(full, v);
        else if (key == "hi") cfg.kappa.hi = parse_value<double>(full, v);
        else if (key == "seed") cfg.kappa.seed = parse_value<std::uint64_t>(full, v);
        else if (key == "n_stripes") cfg.kappa.n_stripes = parse_value<int>(full, v);
        else if (key == "width") cfg.kappa.width = parse_value<double>(full, v);
        else if (key == "background") cfg.kappa.background = parse_value<double>(full, v);
        else if (key == "stripe_value") cfg.kappa.stripe_value = parse_value<double>(full, v);
        else throw std::invalid_argument("config: unknown key '" + full + "'");
      } else {
        if (key == "T") cfg.solver.T = parse_value<double>(full, v);
        else if (key == "N_t") cfg.solver.N_t = parse_value<int>(full, v);
        else if (key == "substeps") cfg.solver.substeps = parse_value<int>(full, v);
        else if (key == "expm_tol") cfg.solver.expm_tol = parse_value<double>(full, v);
        else if (key == "quad_nodes") cfg.solver.quad_nodes = parse_value<int>(full, v);
        else if (key == "quad_panels") cfg.solver.quad_panels = parse_value<int>(full, v);
        else if (key == "compress_tol") cfg.solver.compress_tol = parse_value<double>(full, v);
        else throw std::invalid_argument("config: unknown key '" + full + "'");
      }
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_config(in);
}

Domain make_domain(DomainKind kind) {
  switch (kind) {
    case DomainKind::UnitSquare: return Domain::unit_square();
    case DomainKind::LShape: return Domain::l_shape();
    case DomainKind::UShape: return Domain::u_shape();
  }
  return Domain::unit_square();
}

CoefficientField make_kappa(const ExperimentConfig& cfg) {
  const auto& k = cfg.kappa;
  if (k.type == KappaSpec::Type::Stripes)
    return kappa_stripes(k.n_stripes, k.width, k.background, k.stripe_value);
  return kappa_random_grid(make_domain(cfg.domain), k.epsilon, k.lo, k.hi, k.seed);
}

LqrSystem assemble_system(const TriMesh& mesh, const ExperimentConfig& cfg,
                          const CoefficientField& kappa) {
  const DofMap dofs(mesh, BoundaryTreatment::EliminateDirichlet);
  LqrSystem sys;
  sys.M = assemble_mass(mesh, dofs);
  sys.S = assemble_stiffness(mesh, kappa, dofs);
  sys.B = assemble_input_squares(mesh, cfg.inputs, dofs);
  sys.C = cfg.output_region.empty()
              ? assemble_output_mean(mesh, dofs)
              : assemble_output_square_mean(mesh, cfg.output_region.front(), dofs);
  sys.Q = Matrix::Identity(sys.C.rows(), sys.C.rows());
  sys.Rw = Matrix::Identity(sys.B.cols(), sys.B.cols());
  return sys;
}

LqrSystem restrict_system(const LqrSystem& fine, const SparseMatrix& p) {
  LqrSystem sys;
  sys.M = galerkin_product(p, fine.M);
  sys.S = galerkin_product(p, fine.S);
  sys.B = p.transpose() * fine.B;
  sys.C = fine.C * p;
  sys.Q = fine.Q;
  sys.Rw = fine.Rw;
  return sys;
}

std::vector<double> observed_order(const std::vector<double>& errors,
                                   const std::vector<double>& H) {
  if (errors.size() != H.size() || errors.size() < 2)
    throw std::invalid_argument("observed_order: need two or more matching entries");
  std::vector<double> orders;
  for (std::size_t j = 0; j + 1 < errors.size(); ++j) {
    if (!(errors[j] > 0.0) || !(errors[j + 1] > 0.0) || !(H[j] > 0.0) || !(H[j + 1] > 0.0))
      throw std::invalid_argument("observed_order: entries must be positive");
    orders.push_back(std::log2(errors[j] / errors[j + 1]) / std::log2(H[j] / H[j + 1]));
  }
  return orders;
}

namespace {

std::string format_double(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

void write_csv_metadata(std::ostream& os, const ExperimentConfig& cfg) {
  os << "# name=" << cfg.name << '\n';
  os << "# preset=" << preset_label(cfg.preset) << '\n';
  os << "# domain=" << domain_label(cfg.domain) << '\n';
  if (cfg.kappa.type == KappaSpec::Type::RandomGrid) {
    os << "# kappa=random epsilon=" << format_double(cfg.kappa.epsilon, "%.10g")
       << " lo=" << format_double(cfg.kappa.lo, "%.10g")
       << " hi=" << format_double(cfg.kappa.hi, "%.10g") << " seed=" << cfg.kappa.seed
       << '\n';
  } else {
    os << "# kappa=stripes n=" << cfg.kappa.n_stripes
       << " width=" << format_double(cfg.kappa.width, "%.10g")
       << " background=" << format_double(cfg.kappa.background, "%.10g")
       << " value=" << format_double(cfg.kappa.stripe_value, "%.10g") << '\n';
  }
  os << "# j_min=" << cfg.j_min << " j_max=" << cfg.j_max << " j_ref=" << cfg.j_ref
     << '\n';
  os << "# k=" << (cfg.k == 0 ? std::string("auto(ceil(log2(1/H)))") : std::to_string(cfg.k))
     << '\n';
  os << "# T=" << format_double(cfg.solver.T, "%.10g") << " N_t=" << cfg.solver.N_t
     << " expm_tol=" << format_double(cfg.solver.expm_tol, "%.3g")
     << " quad_nodes=" << cfg.solver.quad_nodes
     << " quad_panels=" << cfg.solver.quad_panels
     << " compress_tol=" << format_double(cfg.solver.compress_tol, "%.3g") << '\n';
}

void write_csv_header(std::ostream& os) {
  os << "H,n_coarse,err_L2_fem,err_L2_lod,err_V_fem,err_V_lod,time_lod_setup,"
        "time_solve_fem,time_solve_lod,rank_final\n";
}

void write_csv_row(std::ostream& os, const LevelRecord& r) {
  os << format_double(r.H, "%.10g") << ',' << r.n_coarse << ','
     << format_double(r.err_L2_fem, "%.10e") << ',' << format_double(r.err_L2_lod, "%.10e")
     << ',' << format_double(r.err_V_fem, "%.10e") << ','
     << format_double(r.err_V_lod, "%.10e") << ','
     << format_double(r.time_lod_setup, "%.4f") << ','
     << format_double(r.time_solve_fem, "%.4f") << ','
     << format_double(r.time_solve_lod, "%.4f") << ',' << r.rank_final << '\n';
}

ConvergenceRecord run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const Domain domain = make_domain(cfg.domain);
  const CoefficientField kappa = make_kappa(cfg);
  const std::vector<MeshPtr> meshes = build_hierarchy(domain, cfg.j_ref);
  const MeshPtr& fine = meshes[cfg.j_ref];

  ConvergenceRecord record;
  const LqrSystem fine_system = assemble_system(*fine, cfg, kappa);
  record.n_reference = fine_system.n();
  const LowRankFactor zero_fine = LowRankFactor::zero(fine_system.n());
  const DreSolution reference = solve_dre(fine_system, zero_fine, cfg.solver);
  record.rank_reference = static_cast<int>(reference.final.rank());
  record.time_reference = reference.timings.total;
  if (log) {
    *log << "reference: level " << cfg.j_ref << ", n = " << record.n_reference
         << ", rank " << record.rank_reference << ", " << reference.timings.total
         << " s\n";
  }
  const OperatorNormContext norms(fine_system.M, fine_system.S);

  std::ofstream csv;
  if (!cfg.output.empty()) {
    csv.open(cfg.output);
    if (!csv) throw std::runtime_error("cannot write '" + cfg.output + "'");
    write_csv_metadata(csv, cfg);
    write_csv_header(csv);
    csv.flush();
  }

  for (int j = cfg.j_min; j <= cfg.j_max; ++j) {
    const MeshPtr& coarse = meshes[j];
    LevelRecord row;
    row.level = j;
    row.H = domain.cell_size() / std::ldexp(1.0, j);

    const SparseMatrix p = prolongation(*coarse, *fine).matrix;
    const LqrSystem fem_system = restrict_system(fine_system, p);
    row.n_coarse = fem_system.n();
    const DreSolution fem =
        solve_dre(fem_system, LowRankFactor::zero(fem_system.n()), cfg.solver);

    const auto setup_start = Clock::now();
    const LodProblem problem(fine, coarse, kappa);
    row.k = cfg.k == 0 ? default_patch_radius(*coarse) : cfg.k;
    const LodBasis basis = build_lod_basis(problem, row.k, fine_system, cfg.threads);
    const double setup = seconds_since(setup_start);
    const DreSolution lod =
        solve_dre(basis.system, LowRankFactor::zero(basis.system.n()), cfg.solver);

    row.err_L2_fem = l2_operator_error({reference.final, fem.final, p, norms});
    row.err_V_fem = v_operator_error({reference.final, fem.final, p, norms});
    row.err_L2_lod = l2_operator_error({reference.final, lod.final, basis.Rh, norms});
    row.err_V_lod = v_operator_error({reference.final, lod.final, basis.Rh, norms});
    row.rank_final = static_cast<int>(lod.final.rank());
    if (cfg.record_timings) {
      row.time_lod_setup = setup;
      row.time_solve_fem = fem.timings.total;
      row.time_solve_lod = lod.timings.total;
    }
    if (log) {
      *log << "level " << j << ": H = " << row.H << ", n = " << row.n_coarse
           << ", k = " << row.k << ", L2 fem/lod = " << row.err_L2_fem << " / "
           << row.err_L2_lod << ", V fem/lod = " << row.err_V_fem << " / "
           << row.err_V_lod << '\n';
    }
    if (csv.is_open()) {
      write_csv_row(csv, row);
      csv.flush();
    }
    record.levels.push_back(row);
  }

  if (record.levels.size() >= 2) {
    std::vector<double> h, l2f, l2l, vf, vl;
    for (const auto& r : record.levels) {
      h.push_back(r.H);
      l2f.push_back(r.err_L2_fem);
      l2l.push_back(r.err_L2_lod);
      vf.push_back(r.err_V_fem);
      vl.push_back(r.err_V_lod);
    }
    record.order_L2_fem = observed_order(l2f, h);
    record.order_L2_lod = observed_order(l2l, h);
    record.order_V_fem = observed_order(vf, h);
    record.order_V_lod = observed_order(vl, h);
    if (csv.is_open()) {
      auto line = [&](const char* label, const std::vector<double>& o) {
        csv << "# order_" << label;
        for (double v : o) csv << ' ' << format_double(v, "%.4f");
        csv << '\n';
      };
      line("L2_fem", record.order_L2_fem);
      line("L2_lod", record.order_L2_lod);
      line("V_fem", record.order_V_fem);
      line("V_lod", record.order_V_lod);
    }
  }
  return record;
}

}  // namespace lodre

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "smolu/dynamics.hpp"
#include "smolu/errors.hpp"
#include "smolu/io.hpp"
#include "smolu/parallel.hpp"
#include "smolu/selfsim.hpp"
#include "smolu/transform.hpp"
#include "smolu/verify.hpp"

namespace fs = std::filesystem;
using namespace smolu;

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kNumerical = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotConverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridOptions {
  std::optional<double> x_min;
  std::optional<double> x_max;
  std::optional<int> per_doubling;
  std::optional<std::size_t> nodes;

  void attach(CLI::App* app) {
    app->add_option("--x-min", x_min, "first grid node")->check(CLI::PositiveNumber);
    app->add_option("--x-max", x_max, "last grid node (sets the node count)")->check(CLI::PositiveNumber);
    app->add_option("--nodes-per-doubling", per_doubling, "grid density")->check(CLI::Range(2, 200));
    app->add_option("--nodes", nodes, "number of grid nodes")->check(CLI::Range(8, 100000));
  }

  Grid build(const Grid& fallback) const {
    if (!x_min && !x_max && !per_doubling && !nodes) return fallback;
    const double lo = x_min.value_or(fallback.x_min());
    const int k = per_doubling.value_or(fallback.nodes_per_doubling().value_or(20));
    std::size_t n = nodes.value_or(fallback.size());
    if (x_max) {
      if (nodes) throw UsageError("give either --x-max or --nodes, not both");
      if (!(*x_max > lo)) throw UsageError("--x-max must exceed --x-min");
      n = static_cast<std::size_t>(std::ceil(std::log2(*x_max / lo) * k - 1e-9)) + 1;
    }
    return Grid::geometric(lo, k, n);
  }
};

void require_writable(const std::string& path) {
  if (path.empty()) return;
  fs::path dir = fs::path(path).parent_path();
  if (dir.empty()) dir = ".";
  if (!fs::is_directory(dir)) throw UsageError("output directory does not exist: " + dir.string());
  if (::access(dir.c_str(), W_OK) != 0) throw UsageError("output directory is not writable: " + dir.string());
  if (fs::is_directory(path)) throw UsageError("output path is a directory: " + path);
}

CoagulationKernel kernel_from(const std::string& spec) {
  try {
    return parse_kernel(spec);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

Profile load_profile(const std::string& spec, const Grid& grid) {
  for (const auto& n : builtin_seed_names())
    if (spec == n) return builtin_seed(n, grid);
  if (!fs::exists(spec)) throw UsageError("no builtin seed or file named '" + spec + "'");
  try {
    return read_profile_csv(spec);
  } catch (const NumericalError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in list '" + s + "'");
    }
  }
  return out;
}

std::string tname(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "snapshot_t%g.csv", t);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-similar profiles of the coagulation equation with kernels near the constant one"};
  app.set_version_flag("--version", std::string("smolu ") + SMOLU_VERSION + " (C++20, Boost " +
                                        std::to_string(BOOST_VERSION / 100000) + "." +
                                        std::to_string(BOOST_VERSION / 100 % 1000) + ")");
  app.set_config("--config", "", "key=value file with defaults; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker cap (0: hardware)")->check(CLI::Range(0u, 1024u));

  std::string kernel = "constant";

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "compute the self-similar profile");
  std::string seed = "exp", solve_out, solve_report;
  SolveSettings ss;
  GridOptions solve_grid;
  solve_cmd->add_option("--kernel", kernel, "constant | brownian | power:<eps>:<alpha>");
  solve_cmd->add_option("--seed", seed, "exp | gamma2 | perturbed | wide | profile CSV");
  solve_cmd->add_option("--out", solve_out, "profile CSV")->required();
  solve_cmd->add_option("--report", solve_report, "solver summary JSON");
  solve_cmd->add_option("--omega", ss.omega, "pseudo-time step in doublings");
  solve_cmd->add_option("--max-iter", ss.max_iterations);
  solve_cmd->add_option("--tol", ss.tolerance);
  solve_cmd->add_option("--refinement", ss.refinement, "Gauss points per cell in the map");
  solve_grid.attach(solve_cmd);

  // evolve
  auto* evolve_cmd = app.add_subcommand("evolve", "integrate the time-dependent equation");
  std::string init = "exp", evolve_dir, reference;
  double t_end = 10.0;
  std::string snaps;
  EvolveSettings es;
  GridOptions evolve_grid;
  evolve_cmd->add_option("--kernel", kernel);
  evolve_cmd->add_option("--init", init, "exp | profile CSV");
  evolve_cmd->add_option("--t-end", t_end)->check(CLI::NonNegativeNumber);
  evolve_cmd->add_option("--snapshots", snaps, "comma separated times");
  evolve_cmd->add_option("--out-dir", evolve_dir)->required();
  evolve_cmd->add_option("--reference", reference, "profile CSV compared with the scaled final state");
  evolve_cmd->add_option("--max-change", es.max_change);
  evolve_cmd->add_option("--dt", es.initial_dt);
  evolve_grid.attach(evolve_cmd);

  // transform
  auto* transform_cmd = app.add_subcommand("transform", "Q, Q', M and the ODE residual of a profile");
  std::string tprofile, tout, tsing;
  bool unit = false, dense = false;
  transform_cmd->add_option("--kernel", kernel);
  transform_cmd->add_option("--profile", tprofile)->required();
  transform_cmd->add_option("--out", tout)->required();
  transform_cmd->add_option("--singularity", tsing, "singularity estimate JSON");
  transform_cmd->add_flag("--unit", unit, "rescale to a unit singularity first");
  transform_cmd->add_flag("--dense", dense, "dense q grid");

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "estimate ledger report");
  std::string vprofile, vout;
  bool no_urec = false;
  verify_cmd->add_option("--kernel", kernel);
  verify_cmd->add_option("--profile", vprofile)->required();
  verify_cmd->add_option("--out", vout)->required();
  verify_cmd->add_flag("--no-urec", no_urec, "skip the U reconstruction on the dense q grid");

  // contract
  auto* contract_cmd = app.add_subcommand("contract", "contraction probe for two profiles");
  std::vector<std::string> seeds;
  std::string cout_path;
  contract_cmd->add_option("--kernel", kernel);
  contract_cmd->add_option("--seeds", seeds, "two builtin seeds or profile CSVs")->required()->expected(2);
  contract_cmd->add_option("--out", cout_path, "result JSON");

  // scan
  auto* scan_cmd = app.add_subcommand("scan", "distance to the constant-kernel transform over eps");
  std::string eps = "0.02,0.05,0.1,0.2", scan_out;
  ScanSettings scs;
  GridOptions scan_grid;
  scan_cmd->add_option("--eps", eps, "comma separated");
  scan_cmd->add_option("--alpha", scs.alpha);
  scan_cmd->add_option("--seed", scs.seed);
  scan_cmd->add_option("--out", scan_out)->required();
  scan_grid.attach(scan_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    set_thread_count(threads);
    const CoagulationKernel k = kernel_from(kernel);

    if (solve_cmd->parsed()) {
      require_writable(solve_out);
      require_writable(solve_report);
      ss.check();
      const Grid grid = solve_grid.build(Grid::standard());
      const SolveResult r = solve(k, load_profile(seed, grid), ss, grid);
      nlohmann::ordered_json j;
      j["kernel"] = k.label();
      j["converged"] = r.converged;
      j["iterations"] = r.iterations;
      j["residual"] = r.residual;
      j["last_change"] = r.last_change;
      j["dilation"] = r.dilation;
      if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
      if (!r.converged) throw NotConverged("solver did not converge: " + r.diagnostic);
      write_profile_csv(r.profile, solve_out);
      if (!solve_report.empty()) atomic_write(solve_report, j.dump(2) + "\n");
      std::cout << "converged in " << r.iterations << " iterations, residual " << format_double(r.residual) << "\n";
    } else if (evolve_cmd->parsed()) {
      if (!fs::is_directory(evolve_dir)) throw UsageError("--out-dir does not exist: " + evolve_dir);
      require_writable(evolve_dir + "/meta.json");
      es.snapshots = parse_list(snaps.empty() ? std::string() : snaps);
      es.check();
      const Grid grid = evolve_grid.build(dynamics_grid());
      std::optional<Profile> start;
      if (init != "exp") start = load_profile(init, grid);
      const State s0 = start ? initial_state(grid, [&start](double x) { return start->value(x); })
                             : initial_state(grid, [](double x) { return std::exp(-x); });
      std::optional<Profile> ref;
      if (!reference.empty()) ref = load_profile(reference, Grid::standard());
      const EvolveResult r = evolve(k, s0, t_end, es);
      nlohmann::ordered_json j;
      j["kernel"] = k.label();
      j["t_end"] = t_end;
      j["initial_mass"] = r.initial_mass;
      j["max_mass_drift"] = r.max_mass_drift;
      j["steps"] = r.steps;
      j["rejected"] = r.rejected;
      j["clip_events"] = r.clip_events;
      j["snapshots"] = nlohmann::ordered_json::array();
      std::vector<std::pair<std::string, std::string>> files;
      for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
        const State& s = r.snapshots[i];
        nlohmann::ordered_json e;
        e["time"] = s.time;
        e["file"] = tname(s.time);
        e["mass"] = r.snapshot_mass[i];
        if (ref && s.time > 0.0) e["l1_to_reference"] = l1_mass_distance(scaled_profile(s, ref->grid()), *ref);
        j["snapshots"].push_back(e);
        files.emplace_back(evolve_dir + "/" + tname(s.time), state_csv(s));
      }
      for (const auto& [path, text] : files) atomic_write(path, text);
      atomic_write(evolve_dir + "/meta.json", j.dump(2) + "\n");
      std::cout << r.steps << " steps, mass drift " << format_double(r.max_mass_drift) << "\n";
    } else if (transform_cmd->parsed()) {
      require_writable(tout);
      require_writable(tsing);
      Profile p = normalize_mass(load_profile(tprofile, Grid::standard()));
      const SingularityEstimate e = locate_singularity(p);
      if (unit) p = rescale_to_unit_singularity(p);
      const TransformCurve c = q_transform(p, k, dense ? QGrid::dense() : QGrid::standard());
      atomic_write(tout, transform_csv(c));
      if (!tsing.empty()) atomic_write(tsing, singularity_json(e));
    } else if (verify_cmd->parsed()) {
      require_writable(vout);
      EstimateSettings es2;
      es2.reconstruct_u = !no_urec;
      const VerificationReport rep = run_estimates(load_profile(vprofile, Grid::standard()), k, es2);
      atomic_write(vout, rep.to_json());
      std::size_t failed = 0;
      for (const auto& e : rep.entries())
        if (e.pass && !*e.pass) {
          ++failed;
          std::cerr << "check " << e.check_id << " failed: measured " << format_double(e.measured) << "\n";
        }
      std::cout << rep.entries().size() << " checks, " << failed << " failed\n";
    } else if (contract_cmd->parsed()) {
      require_writable(cout_path);
      const Grid grid = Grid::standard();
      const double ratio = contraction_probe(k, load_profile(seeds[0], grid), load_profile(seeds[1], grid));
      nlohmann::ordered_json j;
      j["kernel"] = k.label();
      j["seeds"] = seeds;
      j["ratio"] = ratio;
      if (!cout_path.empty()) atomic_write(cout_path, j.dump(2) + "\n");
      std::cout << "ratio " << format_double(ratio) << "\n";
    } else if (scan_cmd->parsed()) {
      require_writable(scan_out);
      const std::vector<double> list = parse_list(eps);
      for (double e : list)
        if (!(e >= 0.0)) throw UsageError("eps values must be >= 0");
      scs.solve = SolveSettings{};
      const std::vector<ScanRow> rows = qclose_scan(list, scs, scan_grid.build(Grid::standard()));
      atomic_write(scan_out, scan_csv(rows));
      for (const auto& r : rows)
        if (!r.error.empty()) std::cerr << "eps " << format_double(r.eps) << ": " << r.error << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NotConverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}

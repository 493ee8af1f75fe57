// One line per criterion: "criterion <n>: PASS|FAIL <details>".
// Usage: smolu_acceptance [n]   (all criteria when n is omitted)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "map_oracle.hpp"
#include "smolu/dynamics.hpp"
#include "smolu/kernel.hpp"
#include "smolu/profile.hpp"
#include "smolu/selfsim.hpp"
#include "smolu/transform.hpp"
#include "smolu/verify.hpp"

#ifndef SMOLU_CLI_PATH
#define SMOLU_CLI_PATH "smolu"
#endif

using namespace smolu;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
  void need(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

fs::path scratch_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("smolu_acceptance_" + tag + "_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SMOLU_CLI_PATH + "\" " + args + " > /dev/null";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double weighted_gap(const CoagulationKernel& k, const Profile& a, const Profile& b) {
  const QGrid qg = QGrid::standard();
  return weighted_norm(q_transform(rescale_to_unit_singularity(a), k, qg),
                       q_transform(rescale_to_unit_singularity(b), k, qg));
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  const auto k = make_constant();
  const Grid g = Grid::standard();
  const Profile e = Profile::exponential(g);
  // the command line run, default seed
  const fs::path dir = scratch_dir("c1");
  const fs::path out = dir / "f.csv";
  auto t0 = Clock::now();
  const int rc = run_cli("--threads 1 solve --kernel constant --out \"" + out.string() + "\"");
  const double t_cli = seconds_since(t0);
  o.need(rc == 0, "cli rc " + std::to_string(rc));
  if (rc == 0) {
    const Profile f = read_profile_csv(out.string());
    o.need(l1_mass_distance(f, e) <= 1e-3, "cli L1 " + fmt("%.2e", l1_mass_distance(f, e)));
    o.need(residual(k, f) <= 1e-4, "cli residual " + fmt("%.2e", residual(k, f)));
    o.need(t_cli <= 30.0, "cli time " + fmt("%.1fs", t_cli));
  }
  // a seed away from the answer
  t0 = Clock::now();
  const SolveResult r = solve(k, builtin_seed("gamma2", g));
  const double t_lib = seconds_since(t0);
  o.need(r.converged, "gamma2 converged in " + std::to_string(r.iterations));
  o.need(l1_mass_distance(r.profile, e) <= 1e-3, "gamma2 L1 " + fmt("%.2e", l1_mass_distance(r.profile, e)));
  o.need(residual(k, r.profile) <= 1e-4, "gamma2 residual " + fmt("%.2e", residual(k, r.profile)));
  o.need(t_lib <= 30.0, "gamma2 time " + fmt("%.1fs", t_lib));
  fs::remove_all(dir);
  return o;
}

Outcome criterion2() {
  Outcome o;
  const Profile e = Profile::exponential(Grid::standard());
  std::vector<double> qs;
  for (int i = 0; i <= 400; ++i) {
    // log spacing in 1+q from 0.1 to 101
    qs.push_back(-1.0 + 0.1 * std::pow(1010.0, i / 400.0));
  }
  qs.push_back(0.0);
  std::sort(qs.begin(), qs.end());
  qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
  const TransformCurve c = q_transform(e, make_constant(), QGrid::from_values(qs));
  double err = 0.0, res = 0.0;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    err = std::max(err, std::fabs(c.Q[i] - qbar(qs[i])));
    res = std::max(res, std::fabs(c.ode_residual[i]));
  }
  o.need(err <= 1e-6, "max |Q - q/(1+q)| " + fmt("%.2e", err));
  o.need(res <= 1e-6, "max |ODE residual| " + fmt("%.2e", res));
  return o;
}

Outcome criterion3() {
  Outcome o;
  const Profile e = Profile::exponential(Grid::standard());
  const SingularityEstimate s1 = locate_singularity(e);
  o.need(s1.q_star >= -1.02 && s1.q_star <= -0.98, "e^-x q* " + fmt("%.6f", s1.q_star));
  o.need(s1.rate_check <= 0.05, "rate_check " + fmt("%.2e", s1.rate_check));
  const SingularityEstimate s2 = locate_singularity(rescale(e, 2.0));
  o.need(s2.q_star >= -2.04 && s2.q_star <= -1.96, "2e^-2x q* " + fmt("%.6f", s2.q_star));
  return o;
}

Outcome criterion4() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto k = make_power(0.1, 1.0 / 3.0);
  const Grid g = Grid::standard();
  const SolveResult r1 = solve(k, builtin_seed("exp", g));
  const SolveResult r2 = solve(k, builtin_seed("gamma2", g));
  o.need(r1.converged && r2.converged, "both solves converged");
  if (r1.converged && r2.converged) {
    const double d = weighted_gap(k, r1.profile, r2.profile);
    o.need(d <= 1e-3, "||Q1 - Q2|| " + fmt("%.2e", d));
  }
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"exp", "gamma2"}, {"exp", "perturbed"}, {"gamma2", "perturbed"}};
  for (const auto& [a, b] : pairs) {
    try {
      const double ratio = contraction_probe(k, builtin_seed(a, g), builtin_seed(b, g));
      o.need(ratio < 1.0, "probe " + a + "/" + b + " " + fmt("%.6f", ratio));
    } catch (const std::exception& ex) {
      o.need(false, "probe " + a + "/" + b + " threw: " + ex.what());
    }
  }
  const double t = seconds_since(t0);
  o.need(t <= 300.0, "time " + fmt("%.1fs", t));
  return o;
}

Outcome criterion5() {
  Outcome o;
  const std::vector<double> eps = {0.02, 0.05, 0.1, 0.2};
  const auto rows = qclose_scan(eps);
  bool ok = true;
  std::string deltas;
  for (const auto& r : rows) {
    ok = ok && r.converged && r.error.empty();
    deltas += (deltas.empty() ? "" : ",") + fmt("%.4g", r.delta);
  }
  o.need(ok, "all converged");
  if (!ok) return o;
  bool mono = true;
  for (std::size_t i = 1; i < rows.size(); ++i) mono = mono && rows[i].delta > rows[i - 1].delta;
  o.need(mono, "delta increasing (" + deltas + ")");
  o.need(rows.front().delta <= rows.back().delta / 2.0,
         "delta(0.02)/delta(0.2) " + fmt("%.3f", rows.front().delta / rows.back().delta));
  return o;
}

Outcome criterion6() {
  Outcome o;
  const Grid g = Grid::standard();
  for (double eps : {0.0, 0.02, 0.05, 0.1}) {
    const auto k = eps == 0.0 ? make_constant() : make_power(eps, 1.0 / 3.0);
    const SolveResult r = solve(k, builtin_seed("exp", g));
    const std::string tag = "eps " + fmt("%g", eps);
    if (!r.converged) {
      // only converged profiles are in scope
      o.need(true, tag + " not converged, skipped");
      continue;
    }
    EstimateSettings s;
    s.reconstruct_u = false;
    const VerificationReport rep = run_estimates(r.profile, k, s);
    auto ok = [&](const std::string& id) {
      const CheckEntry* e = rep.find(id);
      return e && e->pass && *e->pass;
    };
    for (const char* id : {"f1", "f3", "f4"})
      o.need(ok(id), tag + " " + id + " " + fmt("%.4f", rep.find(id) ? rep.find(id)->measured : NAN));
    const CheckEntry* rate = rep.find("decay.rate");
    const CheckEntry* fit = rep.find("decay.residual");
    o.need(rate && rate->measured > 0.0, tag + " decay rate " + fmt("%.4f", rate ? rate->measured : NAN));
    o.need(fit && fit->measured <= 1e-2, tag + " fit residual " + fmt("%.1e", fit ? fit->measured : NAN));
    const VerificationReport mb = check_moment_bound(normalize_mass(r.profile), s.gammas, 2.0);
    o.need(mb.passed(), tag + " moments A=2, least A " + fmt("%.3f", mb.find("moment.min_A")->measured));
  }
  return o;
}

Outcome criterion7() {
  Outcome o;
  const auto k = make_constant();
  const Grid g = dynamics_grid();
  const State s0 = initial_state(g, [](double x) { return std::exp(-x); });
  EvolveSettings st;
  st.snapshots = {3.0, 10.0};
  const EvolveResult r = evolve(k, s0, 100.0, st);
  const State& s3 = r.snapshots.at(0);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g[i];
    if (x < 0.1 || x > 10.0) continue;
    const double exact = std::exp(-x / 4.0) / 16.0;
    err = std::max(err, std::fabs(s3.phi[i] - exact) / exact);
  }
  o.need(err <= 1e-3, "t=3 max relative error " + fmt("%.2e", err));
  const double drift10 = std::fabs(r.snapshot_mass.at(1) - r.initial_mass) / r.initial_mass;
  o.need(r.max_mass_drift <= 1e-6, "max mass drift " + fmt("%.1e", r.max_mass_drift) + " (t=10: " +
                                       fmt("%.1e", drift10) + ")");
  const SolveResult ref = solve(k, builtin_seed("exp", Grid::standard()));
  const double d = l1_mass_distance(scaled_profile(r.snapshots.back()), ref.profile);
  o.need(d <= 0.05, "t=100 L1 to solver profile " + fmt("%.2e", d));
  return o;
}

Outcome criterion8() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> uq(-1.0, 3.0), ux(-3.0, 2.0);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) {
    double q = uq(rng);
    if (q <= -1.0 + 1e-9) q = -1.0 + 1e-9;
    const double x = std::pow(10.0, ux(rng)), y = std::pow(10.0, ux(rng));
    worst = std::min(worst, h_kernel(q, x, y));
  }
  o.need(worst >= 0.0, "min H over 1000 samples " + fmt("%.3e", worst));
  double rel = 0.0;
  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 25; ++j) {
      const double X = 0.1 * std::pow(100.0, i / 24.0), Y = 0.1 * std::pow(100.0, j / 24.0);
      const double lim = h_tilde_limit(X, Y);
      rel = std::max(rel, std::fabs(h_tilde(-1.0 + 1e-3, X, Y) - lim) / lim);
    }
  o.need(rel <= 1e-3, "h_tilde vs limit at 1+q_n=1e-3 " + fmt("%.3e", rel));
  return o;
}

Outcome criterion9() {
  Outcome o;
  const Grid g = Grid::standard();
  const Profile f = builtin_seed("gamma2", g);
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
  std::vector<std::size_t> nodes;
  while (nodes.size() < 20) {
    const std::size_t i = pick(rng);
    if (std::find(nodes.begin(), nodes.end(), i) == nodes.end()) nodes.push_back(i);
  }
  for (const auto& k : {make_constant(), make_brownian(), make_power(0.1, 1.0 / 3.0)}) {
    const std::vector<double> T = CoagulationMap(k, g).apply(f);
    double worst = 0.0, at = 0.0;
    for (std::size_t i : nodes) {
      const double ref = oracle_map(k, f, g[i]);
      const double rel = std::fabs(T[i] - ref) / std::fabs(ref);
      if (rel > worst) {
        worst = rel;
        at = g[i];
      }
    }
    o.need(worst <= 1e-5, k.label() + " " + fmt("%.2e", worst) + " at x=" + fmt("%.3g", at));
  }
  return o;
}

Outcome criterion10() {
  Outcome o;
  const fs::path dir = scratch_dir("c10");
  const std::string prof = (dir / "f.csv").string();
  int rc = run_cli("--threads 1 solve --kernel power:0.1:0.3333333333333333 --out \"" + prof + "\"");
  o.need(rc == 0, "solve rc " + std::to_string(rc));
  if (rc != 0) return o;
  std::vector<std::string> reports;
  for (int threads : {1, 8, 1}) {
    const fs::path out = dir / ("report_" + std::to_string(reports.size()) + ".json");
    rc = run_cli("--threads " + std::to_string(threads) +
                 " verify --kernel power:0.1:0.3333333333333333 --profile \"" + prof + "\" --out \"" +
                 out.string() + "\" 2> /dev/null");
    o.need(rc == 0, "verify threads=" + std::to_string(threads) + " rc " + std::to_string(rc));
    reports.push_back(slurp(out));
  }
  const bool same = reports.size() == 3 && !reports[0].empty() && reports[0] == reports[1] && reports[0] == reports[2];
  o.need(same, "report bytes identical across 1/8/1 threads (" + std::to_string(reports[0].size()) + " bytes)");
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> all = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                     criterion6, criterion7, criterion8, criterion9, criterion10};
  std::vector<int> which;
  if (argc > 1) {
    which.push_back(std::atoi(argv[1]));
  } else {
    for (int i = 1; i <= 10; ++i) which.push_back(i);
  }
  bool ok = true;
  for (int n : which) {
    if (n < 1 || n > 10) {
      std::fprintf(stderr, "criterion must be 1..10\n");
      return 2;
    }
    Outcome r;
    const auto t0 = Clock::now();
    try {
      r = all[n - 1]();
    } catch (const std::exception& e) {
      r.need(false, std::string("exception: ") + e.what());
    }
    std::printf("criterion %d: %s  %s (%.1fs)\n", n, r.pass ? "PASS" : "FAIL", r.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    ok = ok && r.pass;
  }
  return ok ? 0 : 1;
}

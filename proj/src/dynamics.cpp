#include "smolu/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "smolu/errors.hpp"
#include "smolu/io.hpp"
#include "smolu/quadrature.hpp"

namespace smolu {

Grid dynamics_grid() { return Grid::geometric(1e-4, 10, 278); }

State initial_state(const Grid& grid, const std::function<double(double)>& phi0, double time) {
  State s{grid, std::vector<double>(grid.size()), time};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = phi0(grid[i]);
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("initial_state: values must be finite and >= 0");
    s.phi[i] = v;
  }
  return s;
}

double discrete_mass(const State& s) {
  const double h = s.grid.log_step();
  CompensatedSum m;
  for (std::size_t i = 0; i < s.phi.size(); ++i) m.add(h * s.grid[i] * s.grid[i] * s.phi[i]);
  return m.value();
}

Profile state_profile(const State& s) {
  // provisional tail rate; refit_tail replaces it when the last value is positive
  return refit_tail(Profile(s.grid, s.phi, 1.0, 0.0));
}

CollisionOperator::CollisionOperator(const CoagulationKernel& k, const Grid& grid, std::size_t points_per_cell)
    : map_(k, grid, points_per_cell) {}

std::vector<double> CollisionOperator::operator()(const State& s) const {
  const Grid& g = map_.grid();
  if (s.grid.nodes() != g.nodes()) throw std::invalid_argument("collision operator: state on a different grid");
  const std::size_t n = g.size();
  std::vector<double> rate(n, 0.0);
  lambda_ = 0.0;
  if (std::all_of(s.phi.begin(), s.phi.end(), [](double v) { return v == 0.0; })) return rate;
  std::vector<double> gain, loss;
  map_.gain_loss(state_profile(s), gain, loss);
  // mass balance: sum h x^2 (gain/x) against sum h x^2 phi loss
  const double h = g.log_step();
  CompensatedSum in, out;
  for (std::size_t i = 0; i < n; ++i) {
    in.add(h * g[i] * gain[i]);
    out.add(h * g[i] * g[i] * s.phi[i] * loss[i]);
  }
  if (in.value() > 0.0) lambda_ = out.value() / in.value() - 1.0;
  for (std::size_t i = 0; i < n; ++i) rate[i] = (1.0 + lambda_) * gain[i] / g[i] - s.phi[i] * loss[i];
  return rate;
}

std::vector<double> collision_operator(const CoagulationKernel& k, const State& s) {
  return CollisionOperator(k, s.grid)(s);
}

void EvolveSettings::check() const {
  if (!(max_change > 0.0 && max_change < 1.0)) throw std::invalid_argument("evolve: max_change must be in (0,1)");
  if (!(floor > 0.0 && floor <= 1.0)) throw std::invalid_argument("evolve: floor must be in (0,1]");
  if (!(initial_dt > 0.0)) throw std::invalid_argument("evolve: initial_dt must be > 0");
  if (!(min_dt > 0.0)) throw std::invalid_argument("evolve: min_dt must be > 0");
}

namespace {

double change_measure(const Grid& g, const std::vector<double>& phi, const std::vector<double>& d) {
  double peak = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) peak = std::max(peak, g[i] * g[i] * phi[i]);
  const double fl = peak > 0.0 ? peak : 1.0;
  double c = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double x2 = g[i] * g[i];
    c = std::max(c, x2 * std::fabs(d[i]) / std::max(x2 * phi[i], fl));
  }
  return c;
}

}  // namespace

EvolveResult evolve(const CoagulationKernel& k, const State& s0, double t_end, const EvolveSettings& st) {
  st.check();
  if (!(t_end >= s0.time)) throw std::invalid_argument("evolve: t_end must be >= the initial time");
  EvolveResult res;
  res.initial_mass = discrete_mass(s0);
  std::vector<double> marks;
  for (double t : st.snapshots)
    if (t > s0.time && t < t_end) marks.push_back(t);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  marks.push_back(t_end);
  if (t_end == s0.time) {
    res.snapshots.push_back(s0);
    res.snapshot_mass.push_back(res.initial_mass);
    return res;
  }

  const CollisionOperator op(k, s0.grid);
  const Grid& g = s0.grid;
  const std::size_t n = g.size();
  State s = s0;
  double dt = st.initial_dt;
  std::size_t next = 0;
  std::vector<double> k1 = op(s);
  const double m0 = res.initial_mass;
  while (next < marks.size()) {
    const double target = marks[next];
    double step = std::min(dt, target - s.time);
    // stage one bounds the step
    const double c1 = change_measure(g, s.phi, k1) * step;
    if (c1 > st.max_change) {
      step *= 0.9 * st.max_change / c1;
      dt = step;
    }
    std::vector<double> next_phi(n);
    bool accepted = false;
    int halvings = 0;
    while (!accepted) {
      if (step < st.min_dt) throw StepCollapseError("evolve: time step fell below " + format_double(st.min_dt));
      State mid{g, std::vector<double>(n), s.time + step};
      for (std::size_t i = 0; i < n; ++i) mid.phi[i] = std::max(0.0, s.phi[i] + step * k1[i]);
      const std::vector<double> k2 = op(mid);
      std::vector<double> d(n);
      bool negative = false;
      for (std::size_t i = 0; i < n; ++i) {
        d[i] = 0.5 * step * (k1[i] + k2[i]);
        next_phi[i] = s.phi[i] + d[i];
        negative = negative || next_phi[i] < 0.0;
      }
      const double c = change_measure(g, s.phi, d);
      if (c > 1.5 * st.max_change) {
        step *= 0.5;
        ++res.rejected;
        continue;
      }
      if (negative && halvings < 10) {
        step *= 0.5;
        ++halvings;
        ++res.rejected;
        continue;
      }
      if (negative) {
        // clip and restore the conserved mass on the remaining nodes
        const double before = discrete_mass(State{g, next_phi, 0.0});
        for (double& v : next_phi)
          if (v < 0.0) {
            v = 0.0;
            ++res.clip_events;
          }
        const double after = discrete_mass(State{g, next_phi, 0.0});
        if (after > 0.0)
          for (double& v : next_phi) v *= before / after;
      }
      accepted = true;
      dt = c > 0.0 ? std::min(2.0 * step, 0.9 * step * st.max_change / c) : 2.0 * step;
    }
    s.phi = std::move(next_phi);
    s.time += step;
    if (target - s.time <= 1e-12 * std::max(1.0, std::fabs(target))) s.time = target;
    ++res.steps;
    const double m = discrete_mass(s);
    res.max_mass_drift = std::max(res.max_mass_drift, std::fabs(m - m0) / m0);
    if (s.time == target) {
      res.snapshots.push_back(s);
      res.snapshot_mass.push_back(m);
      ++next;
    }
    if (next < marks.size()) k1 = op(s);
  }
  return res;
}

Profile scaled_profile(const State& s, const Grid& target) {
  if (!(s.time > 0.0)) throw std::invalid_argument("scaled_profile: time must be > 0");
  const Profile p = state_profile(s);
  const double t = s.time;
  std::vector<double> v(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) v[i] = t * t * p.value(target[i] * t);
  Profile out(target, v, 1.0, 0.0);
  return v.back() > 0.0 ? refit_tail(out) : out;
}

Profile scaled_profile(const State& s) { return scaled_profile(s, Grid::standard()); }

std::string state_csv(const State& s) {
  std::ostringstream out;
  out << "xi,phi\n";
  for (std::size_t i = 0; i < s.phi.size(); ++i) out << format_double(s.grid[i]) << ',' << format_double(s.phi[i]) << '\n';
  return out.str();
}

}  // namespace smolu

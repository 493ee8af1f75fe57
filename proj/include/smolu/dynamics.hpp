#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "smolu/kernel.hpp"
#include "smolu/profile.hpp"
#include "smolu/selfsim.hpp"

namespace smolu {

/// Density phi(xi, t) at the nodes of a geometric grid in xi.
struct State {
  Grid grid;
  std::vector<double> phi;
  double time = 0.0;
};

/// 10 nodes per doubling on [1e-4, ~1.3e4].
Grid dynamics_grid();
/// phi0(xi) sampled on the grid.
State initial_state(const Grid& grid, const std::function<double(double)>& phi0, double time = 0.0);
/// sum_i h xi_i^2 phi_i, the mass the scheme conserves
double discrete_mass(const State& s);
/// Nodal values with the exponential tail refitted (no tail if the last value is 0).
Profile state_profile(const State& s);

/// Coagulation operator on one grid. The rate at node i is
///   (1 + lambda) gain(xi)/xi - phi(xi) loss(xi)
/// with gain and loss from CoagulationMap::gain_loss and one scalar lambda (of
/// the size of the quadrature error) that makes sum_i h xi_i^2 rate_i vanish.
class CollisionOperator {
 public:
  CollisionOperator(const CoagulationKernel& k, const Grid& grid, std::size_t points_per_cell = 5);
  std::vector<double> operator()(const State& s) const;
  /// lambda from the last call
  double last_correction() const { return lambda_; }
  const Grid& grid() const { return map_.grid(); }

 private:
  CoagulationMap map_;
  mutable double lambda_ = 0.0;
};

std::vector<double> collision_operator(const CoagulationKernel& k, const State& s);

struct EvolveSettings {
  /// bound on max_i |d m_i| / max(m_i, floor * max_j m_j), m = xi^2 phi, per step
  double max_change = 0.01;
  double floor = 1e-2;
  double initial_dt = 1e-3;
  double min_dt = 1e-12;
  /// snapshot times in (t0, t_end]; t_end is always recorded
  std::vector<double> snapshots;
  void check() const;
};

struct EvolveResult {
  std::vector<State> snapshots;
  std::vector<double> snapshot_mass;  // discrete mass at each snapshot
  double initial_mass = 0.0;
  double max_mass_drift = 0.0;  // max relative |mass - initial_mass| over all steps
  std::size_t steps = 0;
  std::size_t rejected = 0;      // steps retried after a negative node
  std::size_t clip_events = 0;   // nodes clipped to 0 after repeated halving
};

/// Explicit two-stage Runge-Kutta (Heun) in time. Throws StepCollapseError when
/// dt falls below min_dt.
EvolveResult evolve(const CoagulationKernel& k, const State& s0, double t_end, const EvolveSettings& s = {});

/// x -> t^2 phi(x t, t) on the standard grid. Throws std::invalid_argument for t <= 0.
Profile scaled_profile(const State& s);
Profile scaled_profile(const State& s, const Grid& target);

/// xi,phi CSV of one snapshot.
std::string state_csv(const State& s);

}  // namespace smolu

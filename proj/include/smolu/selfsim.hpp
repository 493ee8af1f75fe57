#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "smolu/kernel.hpp"
#include "smolu/profile.hpp"

namespace smolu {

struct SolveSettings {
  double omega = 0.5;
  std::size_t max_iterations = 400;
  /// weighted sup of successive changes, weight x (1+x)^2
  double tolerance = 1e-10;
  /// Gauss points per grid cell in the map quadrature
  std::size_t refinement = 5;

  void check() const;
};

struct SolveResult {
  Profile profile;
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double last_change = 0.0;
  double dilation = 1.0;  // mass(T f) at the returned profile, 1 at a fixed point
  std::string diagnostic;
};

/// Discretized fixed-point map
///   T[f](x) = x^{-2} int_0^x dy int_{x-y}^inf dz K(y,z) y f(y) f(z)
/// on one grid. The grid needs an integer number of nodes per doubling so
/// that x/2 is always a node; kernel tables rely on degree-zero homogeneity.
class CoagulationMap {
 public:
  CoagulationMap(const CoagulationKernel& k, const Grid& grid, std::size_t points_per_cell = 5);

  /// T[f] at every node of the grid.
  std::vector<double> apply(const Profile& p) const;

  /// Mass-weighted coagulation terms at every node:
  ///   gain(x) = int_0^x K(y, x-y) y f(y) f(x-y) dy,  loss(x) = int_0^inf K(x, z) f(z) dz,
  /// so that d/dx (x^2 T[f]) = x f loss - gain.
  void gain_loss(const Profile& p, std::vector<double>& gain, std::vector<double>& loss) const;

  const Grid& grid() const { return grid_; }

 private:
  void gain_loss_nodes(const Profile& p, std::size_t count, std::vector<double>& gain, std::vector<double>& loss) const;
  void T_head(const std::vector<double>& phi, double below, std::vector<double>& T) const;

  CoagulationKernel kernel_;
  Grid grid_;
  std::size_t n_;     // Gauss points per cell
  std::size_t half_;  // nodes per doubling
  std::vector<double> ktab_;   // K(1, r^d c_g / c_g'), d in [-(N-2), N-2]
  std::vector<double> lknode_; // log K(1, r^d / c_g'), d in [-(N-1), N-1]
};

/// T[f] with a refitted tail.
Profile apply_map(const CoagulationKernel& k, const Profile& p);

/// sup over nodes in [1e-3, 40] of |f - T[f]| / f.
double residual(const CoagulationKernel& k, const Profile& p);

SolveResult solve(const CoagulationKernel& k, const Profile& seed, const SolveSettings& s = {});
SolveResult solve(const CoagulationKernel& k, const Profile& seed, const SolveSettings& s,
                  const Grid& grid);

/// Built-in seeds, all mass one: exp, gamma2, perturbed, wide.
Profile builtin_seed(const std::string& name, const Grid& grid);
std::vector<std::string> builtin_seed_names();

}  // namespace smolu

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "smolu/grid.hpp"

namespace smolu {

/// Gauss-Legendre points placed in every grid cell, with the interpolant
/// sampled there. weight already contains the dx Jacobian.
struct CellRule {
  std::size_t per_cell = 0;
  std::vector<double> x;
  std::vector<double> weight;
  std::vector<double> f;
};

/// Nonnegative density on a geometric grid. Between nodes the density is
/// interpolated in (log x, log f) with six-point Lagrange stencils; below the
/// first node it continues as f0 (x/x0)^s e^{c (x - x0)} and above the last node as
/// C e^{-a x}.
class Profile {
 public:
  Profile(Grid grid, std::vector<double> values, double tail_rate, double tail_amplitude);

  /// Tail rate fitted on the last decade of nodes, amplitude set for continuity.
  static Profile with_fitted_tail(Grid grid, std::vector<double> values);
  /// Samples f on the grid and fits the tail.
  static Profile sample(const Grid& grid, const std::function<double(double)>& f);
  /// amplitude * e^{-rate x} with the exact tail.
  static Profile exponential(const Grid& grid, double amplitude = 1.0, double rate = 1.0);

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double tail_rate() const { return tail_rate_; }
  double tail_amplitude() const { return tail_amp_; }
  double head_exponent() const { return head_exp_; }
  /// c in the head model f0 (x/x0)^s e^{c (x - x0)}
  double head_linear() const { return head_lin_; }

  /// Interpolated density at x > 0.
  double value(double x) const;
  /// Density of the tail model at x >= x_max.
  double tail_value(double x) const;
  /// Interpolated log-density position helper for cells: value at fractional index u.
  double value_at_position(double u) const;

  /// Six-point rule used by the one-dimensional integrals.
  const CellRule& body_rule() const { return body_; }
  CellRule cell_rule(std::size_t per_cell) const;

  /// Same profile with every value and the tail amplitude multiplied by c.
  Profile scaled(double c) const;

 private:
  void prepare();

  Grid grid_;
  std::vector<double> values_;
  double tail_rate_;
  double tail_amp_;
  std::vector<double> logf_;
  std::vector<char> log_ok_;  // per cell: log stencil usable
  double head_exp_ = 0.0;
  double head_lin_ = 0.0;
  double tail_start_ = 0.0;  // tail model value at x_max
  CellRule body_;
};

/// x^power e^{-rate x}
struct PowerExp {
  double power = 0.0;
  double rate = 0.0;
};

/// x^power (1 - e^{-rate x})
struct OneMinusExp {
  double power = 0.0;
  double rate = 0.0;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

double integrate(const Profile& p, PowerExp w, double lo = 0.0, double hi = kInf);
double integrate(const Profile& p, OneMinusExp w);
/// General weight. The tail uses Gauss-Laguerre at the tail rate, so the
/// weight must grow slower than e^{a x}.
double integrate(const Profile& p, const std::function<double(double)>& weight);

double mass(const Profile& p);
Profile normalize_mass(const Profile& p);
double moment(const Profile& p, double gamma);
/// x -> a f(a x) on the same grid.
Profile rescale(const Profile& p, double a);
/// int_0^1 x^{-alpha} f dx
double negative_moment(const Profile& p, double alpha);

struct TailFit {
  double rate = 0.0;
  double amplitude = 0.0;
  double residual = 0.0;  // rms of log-fit residuals
};

TailFit fit_tail(const Profile& p, double x_lo, double x_hi);
/// Refits the tail on [x_max/10, x_max].
Profile refit_tail(const Profile& p);

/// int x |f1 - f2| dx
double l1_mass_distance(const Profile& a, const Profile& b);

/// sup over dyadic R of (1/R) int_{R/2}^R x f dx
double dyadic_mass_bound(const Profile& p);

void write_profile_csv(const Profile& p, const std::string& path);
Profile read_profile_csv(const std::string& path);
std::string profile_csv(const Profile& p);

}  // namespace smolu

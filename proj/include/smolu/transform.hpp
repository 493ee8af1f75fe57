#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "smolu/kernel.hpp"
#include "smolu/profile.hpp"

namespace smolu {

/// Sorted q samples in (-1, inf).
class QGrid {
 public:
  /// Ladder -1 + 10^{-k/2} (k = 0..12, which includes q = 0), negative points
  /// -10^{-m} towards zero and log-spaced positive points 1e-3..1e3, 8 per decade.
  static QGrid standard();
  /// Dense sampling for u_reconstruct: per_decade points per decade on
  /// -1 + 10^{-k}, k in (0.3, 6], -10^{-m}, m in (0.3, 6], and 10^m, m in [-6, 3].
  /// q = 0 is not included.
  static QGrid dense(int per_decade = 40);
  /// Validates: finite, > -1, strictly increasing.
  static QGrid from_values(std::vector<double> q);
  const std::vector<double>& values() const { return q_; }
  std::size_t size() const { return q_.size(); }
  double operator[](std::size_t i) const { return q_[i]; }

 private:
  explicit QGrid(std::vector<double> q) : q_(std::move(q)) {}
  std::vector<double> q_;
};

struct TransformCurve {
  QGrid qgrid;
  std::vector<double> Q;
  std::vector<double> Qprime;
  std::vector<double> Mcal;
  /// -q Q' - (Q^2 - Q + M)
  std::vector<double> ode_residual;
};

/// Q(q) = int (1 - e^{-qx}) f dx
double q_value(const Profile& p, double q);
/// Q'(q) = int x e^{-qx} f dx
double q_derivative(const Profile& p, double q);

/// M(f,f)(q) = 1/2 int int W(x,y) f(x) f(y) (1 - e^{-qx}) (1 - e^{-qy}), W = K - 2.
/// Body pairs use a ratio table over the profile's cell rule, head and tail
/// contributions use Gauss-Laguerre points (the tail at both rates a and a + q).
class MFunctional {
 public:
  MFunctional(const CoagulationKernel& k, const Profile& p);
  double operator()(double q) const;
  /// Parallel over q; every value is computed the same way for any thread count.
  std::vector<double> evaluate(const std::vector<double>& q) const;

 private:
  CoagulationKernel kernel_;
  Profile profile_;
  std::size_t cells_ = 0;
  std::size_t per_cell_ = 0;
  std::vector<double> wtab_;   // W for body pairs by cell offset and Gauss indices
  std::vector<double> fixed_x_;      // head points and tail points at the tail rate
  std::vector<double> fixed_base_;   // their weights without the (1 - e^{-qx}) factor
  std::vector<double> fixed_body_w_; // W(fixed point, body point)
  std::size_t head_count_ = 0;
};

/// Q, Q', M and the ODE residual on every sample.
/// Throws IntegrabilityError when some q <= -tail_rate.
TransformCurve q_transform(const Profile& p, const CoagulationKernel& k, const QGrid& qgrid);

/// q / (1 + q). Throws std::domain_error for q <= -1.
double qbar(double q);
/// Curve of q/(1+q), the transform of e^{-x} (M = 0).
TransformCurve qbar_curve(const QGrid& qgrid);

/// max over samples of ((1+q)/|q|) |Q_A - Q_B|; at q = 0 the limit |Q'_A(0) - Q'_B(0)|.
double weighted_norm(const TransformCurve& a, const TransformCurve& b);
/// max over samples with q > -1 + nu of |Q_A - Q_B|.
double sup_distance(const TransformCurve& a, const TransformCurve& b, double nu);

struct SingularityEstimate {
  /// q_n - 7 / (4 |Q(q_n)|) at the last iterate.
  double q_star = 0.0;
  /// q_n + 2 Q'/Q'' at the last iterate (exact for a pole plus a constant); used for rescaling.
  double q_refined = 0.0;
  std::vector<double> iterates;
  /// max of |(q - q*) Q(q) + 1| over (q*, q* + window |q*|], q* = q_refined.
  double rate_check = 0.0;
  double nu = 0.5;
  double window = 0.02;
  bool left_domain = false;
  std::string diagnostic;
};

struct SingularitySettings {
  double nu = 0.5;
  double threshold = 1e6;
  std::size_t max_steps = 200;
  /// rate-check window as a fraction of |q*|
  double window = 0.02;
};

/// Iterates q_{n+1} = q_n - 1/(4|Q(q_n)|) from q_0 = -1 + nu until |Q| > threshold.
SingularityEstimate locate_singularity(const Profile& p, const SingularitySettings& s = {});

/// rescale(p, 1/|q|) with q the refined singularity; throws NumericalError if the
/// iteration left the domain.
Profile rescale_to_unit_singularity(const Profile& p, const SingularitySettings& s = {});

/// V(q) = int x^{-alpha} f (1 - e^{-qx}) dx
double v_moment(const Profile& p, double alpha, double q);

/// U = Q - Qbar reconstructed as -q/(1+q)^2 int_{-1}^q ((1+s)/s)^2 (U^2 + M) ds.
/// Needs a curve starting at or below -1 + 1e-5 with no gap wider than a quarter
/// decade (InsufficientGridError otherwise). Value is 0 at q = 0.
std::vector<double> u_reconstruct(const TransformCurve& curve);
/// max over samples q != 0 of ((1+q)/|q|) |U_direct - U_rec|.
double u_reconstruction_error(const TransformCurve& curve);

/// H(q,x,y) = 1/(1+q) int_{-1}^q ((1+s)/s)^2 (1 - e^{-sx}) (1 - e^{-sy}) ds.
double h_kernel(double q, double x, double y);
/// e^{-(X+Y)/(1+q)} (1+q)^{-2} H(q, X/(1+q), Y/(1+q)), evaluated without overflow.
double h_tilde(double qn, double X, double Y);
/// (X+Y)^{-3} int_0^{X+Y} xi^2 e^{-xi} dxi
double h_tilde_limit(double X, double Y);

/// CSV with header q,Q,Qprime,Mcal,residual.
std::string transform_csv(const TransformCurve& c);
/// {"q_star", "q_refined", "rate_check", "iterates", ...}
std::string singularity_json(const SingularityEstimate& e);

}  // namespace smolu

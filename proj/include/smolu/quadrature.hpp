#pragma once

#include <cstddef>
#include <cmath>
#include <vector>

namespace smolu {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return nodes.size(); }
};

/// Gauss-Legendre rule on [0, 1].
const GaussRule& gauss_legendre(std::size_t n);

/// Gauss-Laguerre rule with weights multiplied by e^{s}, so that
/// sum_k w_k g(s_k) approximates int_0^inf g(s) ds for g ~ e^{-s}.
const GaussRule& gauss_laguerre_scaled(std::size_t n);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Upper incomplete gamma Γ(a, z) for any real a and z > 0.
double upper_gamma(double a, double z);

/// int_0^inf (x0 + t)^p e^{-r t} dt for x0 > 0 and r >= 0.
/// Throws DivergentTailError when the integral does not exist.
double shifted_power_exp_integral(double p, double x0, double r);

/// Six-point Lagrange weights at position t for nodes 0..5.
inline void lagrange6(double t, double w[6]) {
  const double d0 = t, d1 = t - 1, d2 = t - 2, d3 = t - 3, d4 = t - 4, d5 = t - 5;
  const double p01 = d0 * d1, p23 = d2 * d3, p45 = d4 * d5;
  w[0] = d1 * p23 * p45 / -120.0;
  w[1] = d0 * p23 * p45 / 24.0;
  w[2] = p01 * d3 * p45 / -12.0;
  w[3] = p01 * d2 * p45 / 12.0;
  w[4] = p01 * p23 * d5 / -24.0;
  w[5] = p01 * p23 * d4 / 120.0;
}

}  // namespace smolu

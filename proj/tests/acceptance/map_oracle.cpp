#include "map_oracle.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
constexpr unsigned kDepth = 10;
constexpr double kTol = 1e-10;

// int_{z0}^inf K(y,z) f(z) dz: log z up to x_max, then linear over the tail
double inner(const smolu::CoagulationKernel& k, const smolu::Profile& p, double y, double z0) {
  const double xmax = p.grid().x_max();
  const double lo = std::max(z0, 1e-30 * std::max(y, 1e-300));
  double s = 0.0;
  if (lo < xmax) {
    auto g = [&](double u) {
      const double z = std::exp(u);
      return z * k(y, z) * p.value(z);
    };
    s += GK::integrate(g, std::log(lo), std::log(xmax), kDepth, kTol);
  }
  const double start = std::max(lo, xmax);
  const double rate = p.tail_rate() > 0.0 ? p.tail_rate() : 1.0;
  if (p.tail_amplitude() > 0.0) {
    auto g = [&](double z) { return k(y, z) * p.value(z); };
    s += GK::integrate(g, start, start + 60.0 / rate, kDepth, kTol);
  }
  return s;
}

}  // namespace

double oracle_map(const smolu::CoagulationKernel& k, const smolu::Profile& p, double x) {
  auto piece = [&](double y) { return y * p.value(y) * inner(k, p, y, x - y); };
  // y in (0, x/2] in log y; y in [x/2, x) through w = x - y in log w
  auto left = [&](double u) {
    const double y = std::exp(u);
    return y * piece(y);
  };
  auto right = [&](double v) {
    const double w = std::exp(v);
    return w * piece(x - w);
  };
  const double a = GK::integrate(left, std::log(1e-30 * x), std::log(0.5 * x), kDepth, kTol);
  const double b = GK::integrate(right, std::log(1e-30 * x), std::log(0.5 * x), kDepth, kTol);
  return (a + b) / (x * x);
}

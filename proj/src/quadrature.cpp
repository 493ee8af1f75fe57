#include "smolu/quadrature.hpp"

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include "smolu/errors.hpp"

namespace smolu {

namespace {

GaussRule build_legendre(std::size_t n) {
  GaussRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / pp;
      z -= dz;
      if (std::fabs(dz) < 1e-16) break;
    }
    // map [-1,1] to [0,1], ascending
    r.nodes[n - 1 - i] = 0.5 * (1.0 + z);
    r.weights[n - 1 - i] = 1.0 / ((1.0 - z * z) * pp * pp);
  }
  return r;
}

GaussRule build_laguerre_scaled(std::size_t n) {
  GaussRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0)
      z = 3.0 / (1.0 + 2.4 * n);
    else if (i == 1)
      z += 15.0 / (1.0 + 2.5 * n);
    else {
      const double ai = i - 1.0;
      z += ((1.0 + 2.55 * ai) / (1.9 * ai)) * (z - r.nodes[i - 2]);
    }
    double pp = 0.0, p2 = 0.0;
    for (int it = 0; it < 200; ++it) {
      double p1 = 1.0;
      p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0 - z) * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (p1 - p2) / z;
      const double dz = p1 / pp;
      z -= dz;
      if (std::fabs(dz) <= 1e-15 * std::max(1.0, z)) break;
    }
    r.nodes[i] = z;
    r.weights[i] = std::exp(z - std::log(std::fabs(pp * n * p2)));
  }
  return r;
}

template <class Builder>
const GaussRule& cached(std::map<std::size_t, GaussRule>& cache, std::mutex& m, std::size_t n,
                        Builder build) {
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build(n)).first;
  return it->second;
}

}  // namespace

const GaussRule& gauss_legendre(std::size_t n) {
  static std::map<std::size_t, GaussRule> cache;
  static std::mutex m;
  return cached(cache, m, n, build_legendre);
}

const GaussRule& gauss_laguerre_scaled(std::size_t n) {
  static std::map<std::size_t, GaussRule> cache;
  static std::mutex m;
  return cached(cache, m, n, build_laguerre_scaled);
}

double upper_gamma(double a, double z) {
  if (a > 0.0) return boost::math::tgamma(a, z);
  // step down from Γ(b, z) with b = a + ceil(-a) in [0, 1)
  double b = a + std::ceil(-a);
  double g = b == 0.0 ? boost::math::expint(1, z) : boost::math::tgamma(b, z);
  while (b > a + 0.5) {
    // Γ(b-1, z) = (Γ(b, z) - z^{b-1} e^{-z}) / (b-1)
    g = (g - std::pow(z, b - 1.0) * std::exp(-z)) / (b - 1.0);
    b -= 1.0;
  }
  return g;
}

double shifted_power_exp_integral(double p, double x0, double r) {
  if (r < 0.0) throw DivergentTailError("tail integral diverges: effective rate < 0");
  if (r == 0.0) {
    if (p >= -1.0) throw DivergentTailError("tail integral diverges: zero effective rate");
    return std::pow(x0, p + 1.0) / (-(p + 1.0));
  }
  const double z = r * x0;
  if (z <= 40.0)
    return std::exp(z) * std::pow(r, -(p + 1.0)) * upper_gamma(p + 1.0, z);
  const GaussRule& g = gauss_laguerre_scaled(32);
  CompensatedSum s;
  for (std::size_t k = 0; k < g.size(); ++k)
    s.add(g.weights[k] * std::exp(-g.nodes[k]) * std::pow(1.0 + g.nodes[k] / z, p));
  return std::pow(x0, p) / r * s.value();
}

}  // namespace smolu

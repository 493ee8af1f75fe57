#include "smolu/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace smolu {

CoagulationKernel::CoagulationKernel(Evaluator eval, double epsilon, double alpha,
                                     std::string label)
    : eval_(std::move(eval)), epsilon_(epsilon), alpha_(alpha), label_(std::move(label)) {
  if (!eval_) throw std::invalid_argument("kernel evaluator is empty");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("kernel epsilon must be >= 0");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("kernel alpha must be in [0,1)");
}

CoagulationKernel make_constant() {
  return CoagulationKernel([](double, double) { return 2.0; }, 0.0, 0.0, "constant");
}

CoagulationKernel make_power(double eps, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("power kernel: alpha must be in [0,1)");
  if (!(eps >= 0.0)) throw std::invalid_argument("power kernel: eps must be >= 0");
  std::ostringstream label;
  label.precision(17);
  label << "power:" << eps << ":" << alpha;
  if (alpha == 0.0)
    return CoagulationKernel([eps](double, double) { return 2.0 + 2.0 * eps; }, eps, alpha,
                             label.str());
  return CoagulationKernel(
      [eps, alpha](double x, double y) {
        const double r = std::pow(x / y, alpha);
        return 2.0 + eps * (r + 1.0 / r);
      },
      eps, alpha, label.str());
}

CoagulationKernel make_brownian() {
  return CoagulationKernel(
      [](double x, double y) {
        const double r = std::cbrt(x / y);
        return 2.0 + r + 1.0 / r;
      },
      1.0, 1.0 / 3.0, "brownian");
}

namespace {

double parse_number(const std::string& s, const std::string& spec) {
  // accept p/q fractions such as 1/3
  const auto slash = s.find('/');
  try {
    std::size_t used = 0;
    if (slash != std::string::npos) {
      const double num = std::stod(s.substr(0, slash), &used);
      if (used != slash) throw std::invalid_argument("");
      const std::string den_s = s.substr(slash + 1);
      const double den = std::stod(den_s, &used);
      if (used != den_s.size() || den == 0.0) throw std::invalid_argument("");
      return num / den;
    }
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad number '" + s + "' in kernel spec '" + spec + "'");
  }
}

}  // namespace

CoagulationKernel parse_kernel(const std::string& spec) {
  if (spec == "constant") return make_constant();
  if (spec == "brownian") return make_brownian();
  if (spec.rfind("power:", 0) == 0) {
    const std::string rest = spec.substr(6);
    const auto colon = rest.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("kernel spec must be power:<eps>:<alpha>, got '" + spec + "'");
    return make_power(parse_number(rest.substr(0, colon), spec),
                      parse_number(rest.substr(colon + 1), spec));
  }
  throw std::invalid_argument("unknown kernel spec '" + spec + "'");
}

ValidationReport validate(const CoagulationKernel& k, std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("validate: samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logu(std::log(1e-6), std::log(1e6));
  const double lambdas[] = {1e-3, 1.0, 1e3};
  const double eps = k.epsilon();
  const double alpha = k.alpha();

  ValidationReport rep;
  for (std::size_t n = 0; n < samples; ++n) {
    const double x = std::exp(logu(rng));
    const double y = std::exp(logu(rng));
    const double kxy = k(x, y);
    const double scale = std::max(std::fabs(kxy), 1.0);
    rep.symmetry = std::max(rep.symmetry, std::fabs(kxy - k(y, x)) / scale);
    for (double l : lambdas)
      rep.homogeneity = std::max(rep.homogeneity, std::fabs(k(l * x, l * y) - kxy) / scale);

    const double w = kxy - 2.0;
    const double env = std::pow(x / y, alpha) + std::pow(y / x, alpha);
    rep.lower_bound = std::max(rep.lower_bound, -w - eps);
    rep.envelope = std::max(rep.envelope, (w - eps * env) / scale);

    // |dK/dx| <= C eps / x * envelope
    const double h = x * 1e-5;
    const double dk = std::fabs(k(x + h, y) - k(x - h, y)) / (2.0 * h);
    double c;
    if (eps > 0.0)
      c = dk * x / (eps * env);
    else
      c = dk * x > 1e-9 ? std::numeric_limits<double>::infinity() : 0.0;
    rep.derivative_constant = std::max(rep.derivative_constant, c);
  }
  const double tol = 1e-9;
  rep.passed = rep.symmetry <= tol && rep.homogeneity <= tol && rep.lower_bound <= tol &&
               rep.envelope <= tol && std::isfinite(rep.derivative_constant);
  return rep;
}

}  // namespace smolu

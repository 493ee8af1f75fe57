#pragma once

#include <cstdint>
#include <functional>
#include <string>

namespace smolu {

/// Homogeneity-zero coagulation kernel with its closeness certificate
///   -eps <= K(x,y) - 2 <= eps ((x/y)^alpha + (y/x)^alpha).
class CoagulationKernel {
 public:
  using Evaluator = std::function<double(double, double)>;

  CoagulationKernel(Evaluator eval, double epsilon, double alpha, std::string label);

  double operator()(double x, double y) const { return eval_(x, y); }
  double evaluate(double x, double y) const { return eval_(x, y); }
  double perturbation(double x, double y) const { return eval_(x, y) - 2.0; }

  double epsilon() const { return epsilon_; }
  double alpha() const { return alpha_; }
  const std::string& label() const { return label_; }

 private:
  Evaluator eval_;
  double epsilon_;
  double alpha_;
  std::string label_;
};

CoagulationKernel make_constant();
/// K = 2 + eps ((x/y)^alpha + (y/x)^alpha).
CoagulationKernel make_power(double eps, double alpha);
/// K = (x^{1/3} + y^{1/3})(x^{-1/3} + y^{-1/3}).
CoagulationKernel make_brownian();

/// Parses `constant`, `brownian` or `power:<eps>:<alpha>`.
CoagulationKernel parse_kernel(const std::string& spec);

struct ValidationReport {
  double symmetry = 0.0;     // max relative |K(x,y) - K(y,x)|
  double homogeneity = 0.0;  // max relative |K(lx,ly) - K(x,y)|
  double lower_bound = 0.0;  // max of -(K - 2) - eps
  double envelope = 0.0;     // max of (K - 2) - eps * envelope
  double derivative_constant = 0.0;
  bool passed = false;
};

ValidationReport validate(const CoagulationKernel& k, std::size_t samples,
                          std::uint64_t seed = 20240601);

}  // namespace smolu

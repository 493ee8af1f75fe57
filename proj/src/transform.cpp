#include "smolu/transform.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "smolu/errors.hpp"
#include "smolu/io.hpp"
#include "smolu/parallel.hpp"
#include "smolu/quadrature.hpp"

namespace smolu {

namespace {

constexpr std::size_t kHeadPoints = 24;
constexpr std::size_t kTailPoints = 32;

void check_integrable(const Profile& p, double q) {
  if (p.tail_amplitude() > 0.0 && !(q > -p.tail_rate()))
    throw IntegrabilityError("transform evaluated at q = " + format_double(q) +
                             " at or beyond the singularity -" + format_double(p.tail_rate()));
}

// (1 - e^{-t}) / t
double one_minus_exp_ratio(double t) {
  if (std::fabs(t) < 1e-8) return 1.0 - 0.5 * t;
  return -std::expm1(-t) / t;
}

}  // namespace

// ---------------------------------------------------------------------------
// q grid

QGrid QGrid::from_values(std::vector<double> q) {
  if (q.empty()) throw std::invalid_argument("QGrid: no samples");
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!std::isfinite(q[i]) || !(q[i] > -1.0)) throw std::invalid_argument("QGrid: samples must be finite and > -1");
    if (i > 0 && !(q[i] > q[i - 1])) throw std::invalid_argument("QGrid: samples must be strictly increasing");
  }
  return QGrid(std::move(q));
}

namespace {

QGrid merged(std::vector<double> q) {
  std::sort(q.begin(), q.end());
  std::vector<double> out;
  for (double v : q)
    if (out.empty() || v - out.back() > 1e-14 * std::max(1.0, std::fabs(v))) out.push_back(v);
  return QGrid::from_values(std::move(out));
}

}  // namespace

QGrid QGrid::standard() {
  std::vector<double> q;
  for (int k = 0; k <= 12; ++k) q.push_back(k == 0 ? 0.0 : -1.0 + std::pow(10.0, -0.5 * k));
  for (int m = 2; m <= 24; ++m) q.push_back(-std::pow(10.0, -m / 8.0));
  for (int m = -24; m <= 24; ++m) q.push_back(std::pow(10.0, m / 8.0));
  return merged(std::move(q));
}

QGrid QGrid::dense(int per_decade) {
  if (per_decade < 4) throw std::invalid_argument("QGrid::dense: per_decade must be >= 4");
  const double d = 1.0 / per_decade;
  std::vector<double> q;
  for (int i = 0;; ++i) {
    const double k = 6.0 - i * d;
    if (k <= 0.3 + 1e-12) break;
    q.push_back(-1.0 + std::pow(10.0, -k));
    q.push_back(-std::pow(10.0, -k));
  }
  for (int i = 0;; ++i) {
    const double m = -6.0 + i * d;
    if (m > 3.0 + 1e-12) break;
    q.push_back(std::pow(10.0, m));
  }
  return merged(std::move(q));
}

// ---------------------------------------------------------------------------
// Q and M

double q_value(const Profile& p, double q) {
  check_integrable(p, q);
  if (q == 0.0) return 0.0;
  return integrate(p, OneMinusExp{0.0, q});
}

double q_derivative(const Profile& p, double q) {
  check_integrable(p, q);
  return integrate(p, PowerExp{1.0, q});
}

MFunctional::MFunctional(const CoagulationKernel& k, const Profile& p) : kernel_(k), profile_(p) {
  const Grid& grid = p.grid();
  const CellRule& body = p.body_rule();
  per_cell_ = body.per_cell;
  cells_ = grid.size() - 1;
  const GaussRule& g = gauss_legendre(per_cell_);
  const double h = grid.log_step();
  const std::size_t P = per_cell_ * per_cell_;
  const std::size_t D = 2 * cells_ - 1;
  wtab_.resize(D * P);
  for (std::size_t di = 0; di < D; ++di) {
    const double d = static_cast<double>(di) - static_cast<double>(cells_ - 1);
    for (std::size_t a = 0; a < per_cell_; ++a)
      for (std::size_t b = 0; b < per_cell_; ++b)
        wtab_[di * P + a * per_cell_ + b] =
            k(std::exp(h * (d + g.nodes[a])), std::exp(h * g.nodes[b])) - 2.0;
  }

  // head points from the head model, tail points at the tail rate
  const double x0 = grid.x_min(), X = grid.x_max();
  const double f0 = p.values()[0];
  if (f0 > 0.0) {
    const double sp1 = p.head_exponent() + 1.0;
    if (sp1 <= 0.0) throw DivergenceError("profile is not integrable at the origin");
    const GaussRule& lag = gauss_laguerre_scaled(kHeadPoints);
    for (std::size_t i = 0; i < lag.size(); ++i) {
      const double x = x0 * std::exp(-lag.nodes[i] / sp1);
      fixed_x_.push_back(x);
      fixed_base_.push_back(x0 * f0 / sp1 * lag.weights[i] *
                            std::exp(-lag.nodes[i] + p.head_linear() * (x - x0)));
    }
  }
  head_count_ = fixed_x_.size();
  if (p.tail_amplitude() > 0.0) {
    const double a = p.tail_rate();
    const GaussRule& lag = gauss_laguerre_scaled(kTailPoints);
    for (std::size_t i = 0; i < lag.size(); ++i) {
      const double x = X + lag.nodes[i] / a;
      fixed_x_.push_back(x);
      fixed_base_.push_back(lag.weights[i] / a * p.tail_value(x));
    }
  }
  const std::size_t nb = body.x.size();
  fixed_body_w_.resize(fixed_x_.size() * nb);
  for (std::size_t i = 0; i < fixed_x_.size(); ++i)
    for (std::size_t j = 0; j < nb; ++j) fixed_body_w_[i * nb + j] = k(fixed_x_[i], body.x[j]) - 2.0;
}

double MFunctional::operator()(double q) const {
  check_integrable(profile_, q);
  if (q == 0.0) return 0.0;
  const CellRule& body = profile_.body_rule();
  const std::size_t nb = body.x.size();
  std::vector<double> A(nb);
  for (std::size_t j = 0; j < nb; ++j) A[j] = body.weight[j] * body.f[j] * -std::expm1(-q * body.x[j]);

  // body x body
  const std::size_t n = per_cell_, P = n * n;
  CompensatedSum total;
  std::vector<double> row(n);
  for (std::size_t i = 0; i < cells_; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t j = 0; j < cells_; ++j) {
      const double* w = &wtab_[(i + cells_ - 1 - j) * P];
      const double* aj = &A[j * n];
      for (std::size_t a = 0; a < n; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < n; ++b) s += w[a * n + b] * aj[b];
        row[a] += s;
      }
    }
    double s = 0.0;
    for (std::size_t a = 0; a < n; ++a) s += A[i * n + a] * row[a];
    total.add(0.5 * s);
  }

  // extra points: head (with 1 - e^{-qx}), tail at rate a (the "1" part) and
  // tail at rate a + q (the "-e^{-qx}" part, weights negative)
  std::vector<double> ex(fixed_x_), ew(fixed_base_.size());
  for (std::size_t i = 0; i < fixed_base_.size(); ++i)
    ew[i] = i < head_count_ ? fixed_base_[i] * -std::expm1(-q * fixed_x_[i]) : fixed_base_[i];
  const std::size_t nfixed = ex.size();
  if (profile_.tail_amplitude() > 0.0) {
    const double a = profile_.tail_rate(), r = a + q, X = profile_.grid().x_max();
    const double start = profile_.tail_value(X);
    const double scale = start * std::exp(-q * X);
    const GaussRule& lag = gauss_laguerre_scaled(kTailPoints);
    // close to the singularity the tail spans many decades before e^{-r x} acts,
    // and W varies with log x there: Legendre in log x up to X + 1/r first
    double xc = X;
    if (r * X < 1.0) {
      xc = X + 1.0 / r;
      const GaussRule& gl = gauss_legendre(8);
      const double span = std::log(xc / X);
      const std::size_t m = static_cast<std::size_t>(std::ceil(span / 0.25));
      const double dl = span / static_cast<double>(m);
      for (std::size_t c = 0; c < m; ++c)
        for (std::size_t i = 0; i < gl.size(); ++i) {
          const double x = X * std::exp(dl * (static_cast<double>(c) + gl.nodes[i]));
          ex.push_back(x);
          ew.push_back(-gl.weights[i] * dl * x * scale * std::exp(-r * (x - X)));
        }
    }
    for (std::size_t i = 0; i < lag.size(); ++i) {
      ex.push_back(xc + lag.nodes[i] / r);
      ew.push_back(-lag.weights[i] * std::exp(-lag.nodes[i]) / r * scale * std::exp(-r * (xc - X)));
    }
  }
  for (std::size_t i = 0; i < ex.size(); ++i) {
    double s = 0.0;
    if (i < nfixed) {
      const double* w = &fixed_body_w_[i * nb];
      for (std::size_t j = 0; j < nb; ++j) s += w[j] * A[j];
    } else {
      for (std::size_t j = 0; j < nb; ++j) s += (kernel_(ex[i], body.x[j]) - 2.0) * A[j];
    }
    total.add(ew[i] * s);  // both orderings of the pair
    double t = 0.0;
    for (std::size_t l = 0; l < ex.size(); ++l) t += (kernel_(ex[i], ex[l]) - 2.0) * ew[l];
    total.add(0.5 * ew[i] * t);
  }
  return total.value();
}

std::vector<double> MFunctional::evaluate(const std::vector<double>& q) const {
  std::vector<double> out(q.size());
  parallel_for(q.size(), [&](std::size_t i) { out[i] = (*this)(q[i]); });
  return out;
}

TransformCurve q_transform(const Profile& p, const CoagulationKernel& k, const QGrid& qgrid) {
  for (double q : qgrid.values()) check_integrable(p, q);
  TransformCurve c{qgrid, {}, {}, {}, {}};
  const std::size_t n = qgrid.size();
  c.Q.resize(n);
  c.Qprime.resize(n);
  c.ode_residual.resize(n);
  const MFunctional M(k, p);
  c.Mcal = M.evaluate(qgrid.values());
  for (std::size_t i = 0; i < n; ++i) {
    const double q = qgrid[i];
    c.Q[i] = q_value(p, q);
    c.Qprime[i] = q_derivative(p, q);
    c.ode_residual[i] = -q * c.Qprime[i] - (c.Q[i] * c.Q[i] - c.Q[i] + c.Mcal[i]);
  }
  return c;
}

double qbar(double q) {
  if (!(q > -1.0)) throw std::domain_error("qbar: q must be > -1");
  return q / (1.0 + q);
}

TransformCurve qbar_curve(const QGrid& qgrid) {
  TransformCurve c{qgrid, {}, {}, {}, {}};
  for (double q : qgrid.values()) {
    c.Q.push_back(qbar(q));
    c.Qprime.push_back(1.0 / ((1.0 + q) * (1.0 + q)));
    c.Mcal.push_back(0.0);
    c.ode_residual.push_back(0.0);
  }
  return c;
}

double weighted_norm(const TransformCurve& a, const TransformCurve& b) {
  if (a.qgrid.values() != b.qgrid.values()) throw std::invalid_argument("weighted_norm: curves on different q grids");
  double m = 0.0;
  for (std::size_t i = 0; i < a.qgrid.size(); ++i) {
    const double q = a.qgrid[i];
    const double v = q == 0.0 ? std::fabs(a.Qprime[i] - b.Qprime[i])
                              : (1.0 + q) / std::fabs(q) * std::fabs(a.Q[i] - b.Q[i]);
    m = std::max(m, v);
  }
  return m;
}

double sup_distance(const TransformCurve& a, const TransformCurve& b, double nu) {
  if (a.qgrid.values() != b.qgrid.values()) throw std::invalid_argument("sup_distance: curves on different q grids");
  double m = 0.0;
  for (std::size_t i = 0; i < a.qgrid.size(); ++i)
    if (a.qgrid[i] > -1.0 + nu) m = std::max(m, std::fabs(a.Q[i] - b.Q[i]));
  return m;
}

// ---------------------------------------------------------------------------
// singularity

SingularityEstimate locate_singularity(const Profile& p, const SingularitySettings& s) {
  if (!(s.nu > 0.0 && s.nu < 1.0)) throw std::invalid_argument("locate_singularity: nu must be in (0,1)");
  if (!(s.threshold > 1.0)) throw std::invalid_argument("locate_singularity: threshold must be > 1");
  if (!(s.window > 0.0 && s.window < 1.0)) throw std::invalid_argument("locate_singularity: window must be in (0,1)");
  SingularityEstimate e;
  e.nu = s.nu;
  e.window = s.window;
  auto note = [&e](const std::string& m) { e.diagnostic += (e.diagnostic.empty() ? "" : "; ") + m; };
  double q = -1.0 + s.nu;
  // a start beyond the singularity is pulled towards 0
  while (p.tail_amplitude() > 0.0 && !(q > -p.tail_rate())) q *= 0.5;
  if (q != -1.0 + s.nu) note("start moved to q0 = " + format_double(q));
  double Q = q_value(p, q);
  e.iterates.push_back(q);
  bool reached = std::fabs(Q) > s.threshold;
  for (std::size_t n = 0; n < s.max_steps && !reached; ++n) {
    const double next = q - 1.0 / (4.0 * std::fabs(Q));
    if (p.tail_amplitude() > 0.0 && !(next > -p.tail_rate())) {
      e.left_domain = true;
      note("iteration left the integrable domain at step " + std::to_string(n + 1));
      break;
    }
    q = next;
    Q = q_value(p, q);
    e.iterates.push_back(q);
    reached = std::fabs(Q) > s.threshold;
  }
  if (!reached && !e.left_domain)
    note("|Q| stayed below " + format_double(s.threshold) + " after " + std::to_string(s.max_steps) + " steps");
  e.q_star = q - 7.0 / (4.0 * std::fabs(Q));
  // pole plus a regular part: Q' ~ c/d^2, Q'' ~ -2c/d^3 with d = q - q*
  check_integrable(p, q);
  e.q_refined = q + 2.0 * q_derivative(p, q) / -integrate(p, PowerExp{2.0, q});
  if (!(e.q_refined < q)) e.q_refined = e.q_star;

  // rate check on (q*, q* + window |q*|]
  const double qs = e.q_refined, r = s.window * std::fabs(qs);
  double worst = 0.0;
  auto probe = [&](double t) {
    const double qq = qs + r * t;
    if (p.tail_amplitude() > 0.0 && !(qq > -p.tail_rate())) return;
    worst = std::max(worst, std::fabs((qq - qs) * q_value(p, qq) + 1.0));
  };
  for (int k = 0; k <= 24; ++k) probe(std::pow(10.0, -k / 4.0));
  for (int k = 2; k <= 9; ++k) probe(0.1 * k);
  e.rate_check = worst;
  return e;
}

Profile rescale_to_unit_singularity(const Profile& p, const SingularitySettings& s) {
  const SingularityEstimate e = locate_singularity(p, s);
  if (e.left_domain) throw NumericalError("singularity search failed: " + e.diagnostic);
  return rescale(p, 1.0 / std::fabs(e.q_refined));
}

double v_moment(const Profile& p, double alpha, double q) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("v_moment: alpha must be in [0,1)");
  check_integrable(p, q);
  if (q == 0.0) return 0.0;
  return integrate(p, OneMinusExp{-alpha, q});
}

// ---------------------------------------------------------------------------
// U representation

namespace {

// int over [va, vb] of a function with values ga, gb at the ends, exact for
// exponentials in v when both values share a sign
double loglinear(double va, double vb, double ga, double gb) {
  const double dv = vb - va;
  if (ga > 0.0 && gb > 0.0) {
    const double l = std::log(gb / ga);
    if (std::fabs(l) < 1e-8) return dv * 0.5 * (ga + gb);
    return dv * (gb - ga) / l;
  }
  return dv * 0.5 * (ga + gb);
}

// int_0^d of c t^p given two samples (d1, j1), (d2, j2) with d1 < d2, d = d1
double power_to_zero(double d1, double j1, double d2, double j2) {
  double p = 0.0;
  if (j1 > 0.0 && j2 > 0.0 && d2 > d1) p = std::log(j2 / j1) / std::log(d2 / d1);
  else if (j1 < 0.0 && j2 < 0.0 && d2 > d1) p = std::log(j2 / j1) / std::log(d2 / d1);
  p = std::max(p, -0.95);
  return d1 * j1 / (p + 1.0);
}

}  // namespace

std::vector<double> u_reconstruct(const TransformCurve& curve) {
  const auto& q = curve.qgrid.values();
  const std::size_t n = q.size();
  if (n < 4 || q.front() > -1.0 + 1e-5)
    throw InsufficientGridError("u_reconstruct: curve must start at or below -1 + 1e-5");
  // region coordinate for the gap check and the segment rule
  auto coord = [](double s) {
    if (s < -0.5) return std::log10(1.0 + s);
    if (s < 0.0) return -std::log10(-s);
    return std::log10(s);
  };
  for (std::size_t i = 1; i < n; ++i) {
    const double a = q[i - 1], b = q[i];
    if (a == 0.0 || b == 0.0 || (a < 0.0) != (b < 0.0)) {
      const double nearest = std::min(a == 0.0 ? kInf : std::fabs(a), b == 0.0 ? kInf : std::fabs(b));
      if (nearest > 1e-4) throw InsufficientGridError("u_reconstruct: samples too far from q = 0");
      continue;
    }
    if ((a < -0.5) == (b < -0.5) && std::fabs(coord(b) - coord(a)) > 0.25)
      throw InsufficientGridError("u_reconstruct: gap wider than a quarter decade near q = " + format_double(a));
    if ((a < -0.5) != (b < -0.5) && b - a > 0.1)
      throw InsufficientGridError("u_reconstruct: gap too wide near q = -0.5");
  }

  std::vector<double> J(n, 0.0), U(n);
  for (std::size_t i = 0; i < n; ++i) {
    U[i] = curve.Q[i] - qbar(q[i]);
    if (q[i] != 0.0) {
      const double r = (1.0 + q[i]) / q[i];
      J[i] = r * r * (U[i] * U[i] + curve.Mcal[i]);
    }
  }

  std::vector<double> I(n, 0.0);
  CompensatedSum acc;
  // [-1, q_0]: power law in 1 + s
  acc.add(power_to_zero(1.0 + q[0], J[0], 1.0 + q[1], J[1]));
  I[0] = acc.value();
  std::size_t last_neg = n, first_pos = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (q[i] < 0.0) last_neg = i;
    if (q[i] > 0.0 && first_pos == n) first_pos = i;
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double a = q[i - 1], b = q[i];
    if (a < 0.0 && b < 0.0) {
      if (b <= -0.5 || a < -0.5) {
        acc.add(loglinear(std::log1p(a), std::log1p(b), J[i - 1] * (1.0 + a), J[i] * (1.0 + b)));
      } else {
        // v = log(-s), ds = s dv
        acc.add(loglinear(std::log(-b), std::log(-a), -b * J[i], -a * J[i - 1]));
      }
    } else if (a > 0.0 && b > 0.0) {
      acc.add(loglinear(std::log(a), std::log(b), a * J[i - 1], b * J[i]));
    } else {
      // crossing (or touching) zero: power laws on each side
      if (a < 0.0 && last_neg == i - 1 && i >= 2)
        acc.add(power_to_zero(-a, J[i - 1], -q[i - 2], J[i - 2]));
      if (b == 0.0) {
        I[i] = acc.value();
        continue;
      }
      if (b > 0.0 && first_pos == i && i + 1 < n)
        acc.add(power_to_zero(b, J[i], q[i + 1], J[i + 1]));
    }
    I[i] = acc.value();
  }

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = -q[i] / ((1.0 + q[i]) * (1.0 + q[i])) * I[i];
  return out;
}

double u_reconstruction_error(const TransformCurve& curve) {
  const std::vector<double> rec = u_reconstruct(curve);
  double m = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double q = curve.qgrid[i];
    if (q == 0.0) continue;
    const double u = curve.Q[i] - qbar(q);
    m = std::max(m, (1.0 + q) / std::fabs(q) * std::fabs(u - rec[i]));
  }
  return m;
}

// ---------------------------------------------------------------------------
// H kernels

double h_kernel(double q, double x, double y) {
  if (!(q > -1.0)) throw std::domain_error("h_kernel: q must be > -1");
  if (!(x >= 0.0 && y >= 0.0)) throw std::domain_error("h_kernel: x, y must be >= 0");
  auto g = [x, y](double s) {
    const double u = 1.0 + s;
    return u * u * x * y * one_minus_exp_ratio(s * x) * one_minus_exp_ratio(s * y);
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double v;
  if (q > 0.0)
    v = GK::integrate(g, -1.0, 0.0, 15, 1e-13) + GK::integrate(g, 0.0, q, 15, 1e-13);
  else
    v = GK::integrate(g, -1.0, q, 15, 1e-13);
  return v / (1.0 + q);
}

double h_tilde(double qn, double X, double Y) {
  if (!(qn > -1.0)) throw std::domain_error("h_tilde: q must be > -1");
  if (!(X >= 0.0 && Y >= 0.0)) throw std::domain_error("h_tilde: X, Y must be >= 0");
  const double e = 1.0 + qn;
  const double x = X / e, y = Y / e;
  if (qn >= 0.0) return std::exp(-(x + y)) / (e * e) * h_kernel(qn, x, y);
  // with s = -1 + e t: e^{-x} (1 - e^{-s x}) = e^{-x} - e^{-t X}
  const double ex = std::exp(-x), ey = std::exp(-y);
  auto g = [&](double t) {
    const double s = -1.0 + e * t;
    return t * t / (s * s) * (ex - std::exp(-t * X)) * (ey - std::exp(-t * Y));
  };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, 0.0, 1.0, 15, 1e-13);
}

double h_tilde_limit(double X, double Y) {
  const double z = X + Y;
  if (!(z > 0.0)) return 1.0 / 3.0;
  // int_0^z xi^2 e^{-xi} = Gamma(3) P(3, z)
  return 2.0 * boost::math::gamma_p(3.0, z) / (z * z * z);
}

// ---------------------------------------------------------------------------
// output

std::string transform_csv(const TransformCurve& c) {
  std::ostringstream out;
  out << "q,Q,Qprime,Mcal,residual\n";
  for (std::size_t i = 0; i < c.qgrid.size(); ++i)
    out << format_double(c.qgrid[i]) << ',' << format_double(c.Q[i]) << ',' << format_double(c.Qprime[i]) << ','
        << format_double(c.Mcal[i]) << ',' << format_double(c.ode_residual[i]) << '\n';
  return out.str();
}

std::string singularity_json(const SingularityEstimate& e) {
  nlohmann::ordered_json j;
  j["q_star"] = e.q_star;
  j["q_refined"] = e.q_refined;
  j["rate_check"] = e.rate_check;
  j["window"] = e.window;
  j["nu"] = e.nu;
  j["left_domain"] = e.left_domain;
  j["iterates"] = e.iterates;
  if (!e.diagnostic.empty()) j["diagnostic"] = e.diagnostic;
  return j.dump(2) + "\n";
}

}  // namespace smolu

#include "smolu/profile.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "smolu/errors.hpp"
#include "smolu/io.hpp"
#include "smolu/quadrature.hpp"

namespace smolu {

namespace {

constexpr std::size_t kBodyPoints = 6;
constexpr std::size_t kTailPoints = 32;
constexpr std::size_t kHeadPoints = 24;

std::size_t stencil_start(std::size_t cell, std::size_t n) {
  if (cell < 2) return 0;
  return std::min(cell - 2, n - 6);
}

double power_exp(double x, double p, double q) {
  double w = q == 0.0 ? 1.0 : std::exp(-q * x);
  if (p == 1.0)
    w *= x;
  else if (p != 0.0)
    w *= std::pow(x, p);
  return w;
}

double one_minus_exp(double x, double p, double q) {
  double w = -std::expm1(-q * x);
  if (p != 0.0) w *= std::pow(x, p);
  return w;
}

// int_0^u x^p w(x) f0 (x/x0)^s e^{c (x - x0)} dx as a power series in x, where w = e^{-q x}
// or 1 - e^{-q x}. Coefficients of e^{c x} w(x): b^k / k! with b = c - q, or (c^k - b^k) / k!.
double head_series(double f0, double x0, double s, double c, double p, double q, double u, bool one_minus) {
  if (f0 == 0.0 || u <= 0.0) return 0.0;
  const double e = p + s + 1.0;
  const std::size_t k0 = one_minus ? 1 : 0;
  if (e + static_cast<double>(k0) <= 0.0)
    throw DivergenceError("integrand is not integrable at the origin (local exponent " +
                          std::to_string(p + s) + ")");
  const double b = c - q;
  CompensatedSum sum;
  double bk = 1.0;     // (b u)^k / k!
  double dk = 0.0;     // ((c u)^k - (b u)^k) / k!
  double ck = 1.0;     // (c u)^k / k!
  for (std::size_t k = 0; k < 400; ++k) {
    if (k > 0) {
      const double kk = static_cast<double>(k);
      dk = (c * u * dk + q * u * bk) / kk;
      bk *= b * u / kk;
      ck *= c * u / kk;
    }
    const double coef = one_minus ? dk : bk;
    if (k < k0) continue;
    const double t = coef / (e + static_cast<double>(k));
    sum.add(t);
    if (k > 2 && std::fabs(t) < 1e-18 * std::fabs(sum.value()) && std::fabs(ck) + std::fabs(bk) < 1e-18) break;
  }
  return sum.value() * f0 * std::exp(-c * x0) * std::pow(u / x0, s) * std::pow(u, p + 1.0);
}

}  // namespace

Profile::Profile(Grid grid, std::vector<double> values, double tail_rate, double tail_amplitude)
    : grid_(std::move(grid)), values_(std::move(values)), tail_rate_(tail_rate), tail_amp_(tail_amplitude) {
  if (values_.size() != grid_.size()) throw std::invalid_argument("profile: value count does not match grid");
  for (double v : values_)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("profile: values must be finite and >= 0");
  if (!(tail_rate_ > 0.0) || !std::isfinite(tail_rate_)) throw std::invalid_argument("profile: tail rate must be > 0");
  if (!(tail_amp_ >= 0.0)) throw std::invalid_argument("profile: tail amplitude must be >= 0");
  prepare();
}

void Profile::prepare() {
  const std::size_t n = values_.size();
  const double h = grid_.log_step();
  logf_.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    logf_[i] = values_[i] > 0.0 ? std::log(values_[i]) : -std::numeric_limits<double>::infinity();
  log_ok_.assign(n - 1, 0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const std::size_t s0 = stencil_start(j, n);
    bool ok = true;
    for (std::size_t l = 0; l < 6; ++l) ok = ok && values_[s0 + l] > 0.0;
    log_ok_[j] = ok;
  }
  // head: log f = log f0 + s log(x/x0) + c (x - x0) through nodes 0, d, 2d
  head_exp_ = 0.0;
  head_lin_ = 0.0;
  const std::size_t d = std::min<std::size_t>(grid_.nodes_per_doubling().value_or(1), (n - 1) / 2);
  if (values_[0] > 0.0 && values_[d] > 0.0 && values_[2 * d] > 0.0) {
    const double x0 = grid_[0], x1 = grid_[d], x2 = grid_[2 * d];
    const double l0 = logf_[0], l1 = logf_[d], l2 = logf_[2 * d];
    const double du = static_cast<double>(d) * h;
    head_lin_ = ((l2 - l1) - (l1 - l0)) / ((x2 - x1) - (x1 - x0));
    head_exp_ = ((l1 - l0) - head_lin_ * (x1 - x0)) / du;
  } else if (values_[0] > 0.0 && values_[1] > 0.0) {
    head_exp_ = (logf_[1] - logf_[0]) / h;
  }

  const double xmax = grid_.x_max();
  tail_start_ = tail_amp_ > 0.0 ? std::exp(std::log(tail_amp_) - tail_rate_ * xmax) : 0.0;
  if (tail_amp_ > 0.0) {
    const double last = values_.back();
    if (!(std::fabs(tail_start_ - last) <= 1e-6 * last))
      throw std::invalid_argument("profile: tail extension is not continuous at x_max");
  }
  body_ = cell_rule(kBodyPoints);
}

double Profile::value_at_position(double u) const {
  const std::size_t n = values_.size();
  const double umax = static_cast<double>(n - 1);
  if (u <= 0.0) {
    const double x0 = grid_[0];
    return values_[0] * std::exp(u * grid_.log_step() * head_exp_ + head_lin_ * x0 * std::expm1(u * grid_.log_step()));
  }
  if (u >= umax) return values_.back();
  std::size_t j = static_cast<std::size_t>(u);
  if (j > n - 2) j = n - 2;
  if (log_ok_[j]) {
    const std::size_t s0 = stencil_start(j, n);
    double w[6];
    lagrange6(u - static_cast<double>(s0), w);
    double lf = 0.0;
    for (std::size_t l = 0; l < 6; ++l) lf += w[l] * logf_[s0 + l];
    return std::exp(lf);
  }
  const double t = u - static_cast<double>(j);
  const double xj = grid_[j], xj1 = grid_[j + 1];
  const double x = xj * std::exp(t * grid_.log_step());
  const double lam = (x - xj) / (xj1 - xj);
  return values_[j] + lam * (values_[j + 1] - values_[j]);
}

double Profile::tail_value(double x) const {
  if (tail_start_ == 0.0) return 0.0;
  return tail_start_ * std::exp(-tail_rate_ * (x - grid_.x_max()));
}

double Profile::value(double x) const {
  if (!(x > 0.0)) throw std::domain_error("profile evaluated at x <= 0");
  const double x0 = grid_.x_min();
  if (x < x0) return values_[0] * std::pow(x / x0, head_exp_) * std::exp(head_lin_ * (x - x0));
  if (x > grid_.x_max()) return tail_value(x);
  return value_at_position(grid_.position(x));
}

CellRule Profile::cell_rule(std::size_t per_cell) const {
  const GaussRule& g = gauss_legendre(per_cell);
  const std::size_t cells = values_.size() - 1;
  const double h = grid_.log_step();
  CellRule r;
  r.per_cell = per_cell;
  r.x.resize(cells * per_cell);
  r.weight.resize(cells * per_cell);
  r.f.resize(cells * per_cell);
  for (std::size_t j = 0; j < cells; ++j) {
    for (std::size_t k = 0; k < per_cell; ++k) {
      const std::size_t idx = j * per_cell + k;
      const double x = grid_[j] * std::exp(h * g.nodes[k]);
      r.x[idx] = x;
      r.weight[idx] = h * g.weights[k] * x;
      r.f[idx] = value_at_position(static_cast<double>(j) + g.nodes[k]);
    }
  }
  return r;
}

Profile Profile::scaled(double c) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= c;
  return Profile(grid_, std::move(v), tail_rate_, tail_amp_ * c);
}

Profile Profile::with_fitted_tail(Grid grid, std::vector<double> values) {
  // provisional tail (amplitude 0) so the fit can run on the node values
  Profile tmp(std::move(grid), std::move(values), 1.0, 0.0);
  return refit_tail(tmp);
}

Profile Profile::sample(const Grid& grid, const std::function<double(double)>& f) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid[i]);
  return with_fitted_tail(grid, std::move(v));
}

Profile Profile::exponential(const Grid& grid, double amplitude, double rate) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = amplitude * std::exp(-rate * grid[i]);
  return Profile(grid, std::move(v), rate, amplitude);
}

// ---------------------------------------------------------------------------
// integration

namespace {

double tail_finite(const Profile& p, double lo, double hi, const std::function<double(double)>& w) {
  // composite Gauss-Legendre in log x, also resolving the exponential scale
  const double r = p.tail_rate();
  const double pieces_log = std::log(hi / lo) / 0.1;
  const double pieces_exp = r * (hi - lo);
  const std::size_t m =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(std::max(pieces_log, pieces_exp))), 1, 20000);
  const GaussRule& g = gauss_legendre(8);
  const double L = std::log(lo), dl = std::log(hi / lo) / static_cast<double>(m);
  CompensatedSum s;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double x = std::exp(L + dl * (static_cast<double>(i) + g.nodes[k]));
      s.add(g.weights[k] * dl * x * w(x) * p.tail_value(x));
    }
  return s.value();
}

double body_partial(const Profile& p, std::size_t cell, double a, double b,
                    const std::function<double(double)>& w) {
  const GaussRule& g = gauss_legendre(kBodyPoints);
  const Grid& grid = p.grid();
  const double ua = grid.position(a), ub = grid.position(b);
  CompensatedSum s;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double u = ua + (ub - ua) * g.nodes[k];
    const double x = grid.x_min() * std::exp(u * grid.log_step());
    const double uu = std::clamp(u, static_cast<double>(cell), static_cast<double>(cell + 1));
    s.add(g.weights[k] * (ub - ua) * grid.log_step() * x * w(x) * p.value_at_position(uu));
  }
  return s.value();
}

}  // namespace

double integrate(const Profile& p, PowerExp w, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  if (lo < 0.0) throw std::invalid_argument("integrate: lower limit must be >= 0");
  const Grid& grid = p.grid();
  const double x0 = grid.x_min(), X = grid.x_max();
  const double pw = w.power, q = w.rate;
  CompensatedSum total;

  // head
  if (lo < x0) {
    const double s = p.head_exponent();
    const double b = std::min(hi, x0);
    double v = head_series(p.values()[0], x0, s, p.head_linear(), pw, q, b, false);
    if (lo > 0.0) v -= head_series(p.values()[0], x0, s, p.head_linear(), pw, q, lo, false);
    total.add(v);
  }

  // body
  const double blo = std::max(lo, x0), bhi = std::min(hi, X);
  if (bhi > blo) {
    const CellRule& r = p.body_rule();
    const std::size_t cells = grid.size() - 1;
    auto wf = [pw, q](double x) { return power_exp(x, pw, q); };
    for (std::size_t j = 0; j < cells; ++j) {
      const double a = grid[j], b = grid[j + 1];
      if (b <= blo || a >= bhi) continue;
      if (a >= blo && b <= bhi) {
        for (std::size_t k = j * r.per_cell; k < (j + 1) * r.per_cell; ++k)
          total.add(r.weight[k] * r.f[k] * power_exp(r.x[k], pw, q));
      } else {
        total.add(body_partial(p, j, std::max(a, blo), std::min(b, bhi), wf));
      }
    }
  }

  // tail
  if (hi > X && p.tail_amplitude() > 0.0) {
    const double L = std::max(lo, X);
    if (std::isinf(hi)) {
      const double r = p.tail_rate() + q;
      if (r <= 0.0 && !(r == 0.0 && pw < -1.0))
        throw DivergentTailError("weight grows at least as fast as the tail decays (rate " +
                                 std::to_string(-q) + " vs tail rate " + std::to_string(p.tail_rate()) + ")");
      total.add(p.tail_value(L) * std::exp(-q * L) * shifted_power_exp_integral(pw, L, r));
    } else {
      total.add(tail_finite(p, L, hi, [pw, q](double x) { return power_exp(x, pw, q); }));
    }
  }
  return total.value();
}

double integrate(const Profile& p, OneMinusExp w) {
  const Grid& grid = p.grid();
  const double x0 = grid.x_min(), X = grid.x_max();
  const double pw = w.power, q = w.rate;
  if (q == 0.0) return 0.0;
  CompensatedSum total;
  total.add(head_series(p.values()[0], x0, p.head_exponent(), p.head_linear(), pw, q, x0, true));
  const CellRule& r = p.body_rule();
  for (std::size_t k = 0; k < r.x.size(); ++k) total.add(r.weight[k] * r.f[k] * one_minus_exp(r.x[k], pw, q));
  if (p.tail_amplitude() > 0.0) {
    const double a = p.tail_rate();
    if (a + q <= 0.0)
      throw DivergentTailError("weight grows at least as fast as the tail decays");
    const double fX = p.tail_value(X);
    total.add(fX * (shifted_power_exp_integral(pw, X, a) -
                    std::exp(-q * X) * shifted_power_exp_integral(pw, X, a + q)));
  }
  return total.value();
}

double integrate(const Profile& p, const std::function<double(double)>& weight) {
  const Grid& grid = p.grid();
  const double x0 = grid.x_min(), X = grid.x_max();
  CompensatedSum total;
  const double f0 = p.values()[0];
  if (f0 > 0.0) {
    const double sp1 = p.head_exponent() + 1.0;
    if (sp1 <= 0.0) throw DivergenceError("profile is not integrable at the origin");
    const GaussRule& g = gauss_laguerre_scaled(kHeadPoints);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double t = g.nodes[k] / sp1;
      const double x = x0 * std::exp(-t);
      total.add(x0 * f0 / sp1 * g.weights[k] * std::exp(-g.nodes[k] + p.head_linear() * (x - x0)) * weight(x));
    }
  }
  const CellRule& r = p.body_rule();
  for (std::size_t k = 0; k < r.x.size(); ++k) total.add(r.weight[k] * r.f[k] * weight(r.x[k]));
  if (p.tail_amplitude() > 0.0) {
    const double a = p.tail_rate();
    const GaussRule& g = gauss_laguerre_scaled(kTailPoints);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double x = X + g.nodes[k] / a;
      total.add(g.weights[k] / a * p.tail_value(x) * weight(x));
    }
  }
  return total.value();
}

double mass(const Profile& p) { return integrate(p, PowerExp{1.0, 0.0}); }

Profile normalize_mass(const Profile& p) {
  const double m = mass(p);
  if (!(m > 0.0)) throw ZeroProfileError("profile has zero mass");
  return p.scaled(1.0 / m);
}

double moment(const Profile& p, double gamma) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("moment: gamma must be >= 0");
  return integrate(p, PowerExp{gamma, 0.0});
}

Profile rescale(const Profile& p, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("rescale: a must be > 0");
  const Grid& grid = p.grid();
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = a * p.value(a * grid[i]);
  const double rate = a * p.tail_rate();
  const double amp = (p.tail_amplitude() > 0.0 && v.back() > 0.0)
                         ? std::exp(std::log(v.back()) + rate * grid.x_max())
                         : 0.0;
  return Profile(grid, std::move(v), rate, amp);
}

double negative_moment(const Profile& p, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("negative_moment: alpha must be in [0,1)");
  return integrate(p, PowerExp{-alpha, 0.0}, 0.0, 1.0);
}

TailFit fit_tail(const Profile& p, double x_lo, double x_hi) {
  const Grid& grid = p.grid();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    if (x < x_lo || x > x_hi) continue;
    if (!(p.values()[i] > 0.0)) throw NonpositiveValuesError("fit_tail: nonpositive value in window");
    const double y = std::log(p.values()[i]);
    pts.emplace_back(x, y);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("fit_tail: window holds fewer than two nodes");
  const double nn = static_cast<double>(n);
  const double mx = sx / nn, my = sy / nn;
  const double slope = (sxy - nn * mx * my) / (sxx - nn * mx * mx);
  const double icpt = my - slope * mx;
  double ss = 0.0;
  for (auto [x, y] : pts) ss += (y - icpt - slope * x) * (y - icpt - slope * x);
  return TailFit{-slope, std::exp(icpt), std::sqrt(ss / nn)};
}

Profile refit_tail(const Profile& p) {
  const Grid& grid = p.grid();
  const double X = grid.x_max();
  const double last = p.values().back();
  if (!(last > 0.0)) return Profile(grid, p.values(), p.tail_rate(), 0.0);
  double lo = X / 10.0;
  // use only the trailing positive run of the window
  for (std::size_t i = grid.size(); i-- > 0;) {
    if (grid[i] < lo) break;
    if (!(p.values()[i] > 0.0)) {
      lo = grid[i + 1];
      break;
    }
  }
  const TailFit fit = fit_tail(p, lo, X);
  if (!(fit.rate > 0.0)) throw DivergentTailError("profile tail does not decay (fitted rate " + std::to_string(fit.rate) + ")");
  const double amp = std::exp(std::log(last) + fit.rate * X);
  return Profile(grid, p.values(), fit.rate, amp);
}

double l1_mass_distance(const Profile& a, const Profile& b) {
  CompensatedSum s;
  const Grid& grid = a.grid();
  const double x0 = grid.x_min(), X = grid.x_max();
  // head: substitute x = x0 e^{-t}, the factor x makes it decay like e^{-t}
  {
    const GaussRule& g = gauss_laguerre_scaled(kHeadPoints);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double x = x0 * std::exp(-g.nodes[k]);
      s.add(g.weights[k] * x * x * std::fabs(a.value(x) - b.value(x)));
    }
  }
  const CellRule& r = a.body_rule();
  for (std::size_t k = 0; k < r.x.size(); ++k) s.add(r.weight[k] * r.x[k] * std::fabs(r.f[k] - b.value(r.x[k])));
  {
    const double rate = std::min(a.tail_rate(), b.tail_rate());
    const GaussRule& g = gauss_laguerre_scaled(kTailPoints);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double x = X + g.nodes[k] / rate;
      s.add(g.weights[k] / rate * x * std::fabs(a.value(x) - b.value(x)));
    }
  }
  return s.value();
}

double dyadic_mass_bound(const Profile& p) {
  const Grid& grid = p.grid();
  double best = 0.0;
  for (int j = static_cast<int>(std::ceil(std::log2(2.0 * grid.x_min())));
       std::ldexp(1.0, j) <= grid.x_max(); ++j) {
    const double R = std::ldexp(1.0, j);
    best = std::max(best, integrate(p, PowerExp{1.0, 0.0}, R / 2.0, R) / R);
  }
  return best;
}

std::string profile_csv(const Profile& p) {
  std::ostringstream out;
  out << "x,f\n";
  for (std::size_t i = 0; i < p.grid().size(); ++i)
    out << format_double(p.grid()[i]) << ',' << format_double(p.values()[i]) << '\n';
  out << "# tail_rate=" << format_double(p.tail_rate()) << '\n';
  out << "# tail_amp=" << format_double(p.tail_amplitude()) << '\n';
  return out.str();
}

void write_profile_csv(const Profile& p, const std::string& path) { atomic_write(path, profile_csv(p)); }

Profile read_profile_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<double> xs, fs;
  double rate = -1.0, amp = -1.0;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      const double v = std::stod(line.substr(eq + 1));
      if (key == "tail_rate") rate = v;
      if (key == "tail_amp") amp = v;
      continue;
    }
    if (!header) {
      if (line != "x,f") throw std::runtime_error(path + ": expected header 'x,f'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected x,f");
    try {
      xs.push_back(std::stod(line.substr(0, comma)));
      fs.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  if (!header) throw std::runtime_error(path + ": missing header");
  Grid grid = Grid::from_nodes(std::move(xs));
  if (rate > 0.0 && amp >= 0.0) return Profile(std::move(grid), std::move(fs), rate, amp);
  return Profile::with_fitted_tail(std::move(grid), std::move(fs));
}

}  // namespace smolu

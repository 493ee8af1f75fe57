#include "smolu/selfsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "smolu/errors.hpp"
#include "smolu/parallel.hpp"
#include "smolu/quadrature.hpp"

namespace smolu {

namespace {

constexpr std::size_t kTailPoints = 24;

// int_0^b g(y) f(y) dy with f on its head model, b <= x0; g may grow like y^{-alpha}
template <class G>
double head_integral(const Profile& p, double alpha, double b, G&& g) {
  const double f0 = p.values()[0], sh = p.head_exponent(), ch = p.head_linear(), x0 = p.grid().x_min();
  if (f0 == 0.0 || b <= 0.0) return 0.0;
  const double r = sh + 1.0 - alpha;
  if (!(r > 0.0)) throw DivergenceError("coagulation integral diverges at the origin");
  const GaussRule& lag = gauss_laguerre_scaled(kTailPoints);
  const double fb = f0 * std::pow(b / x0, sh);
  double acc = 0.0;
  for (std::size_t t = 0; t < kTailPoints; ++t) {
    const double tt = lag.nodes[t] / r;
    const double y = b * std::exp(-tt);
    acc += lag.weights[t] * std::exp(-lag.nodes[t] - alpha * tt + ch * (y - x0)) * g(y);
  }
  return b * fb * acc / r;
}

std::size_t stencil_start(std::size_t cell, std::size_t n) {
  if (cell < 2) return 0;
  return std::min(cell - 2, n - 6);
}

}  // namespace

void SolveSettings::check() const {
  if (!(omega > 0.0 && omega <= 1.0)) throw std::invalid_argument("omega must be in (0,1]");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
  if (refinement < 2 || refinement > 16) throw std::invalid_argument("refinement must be in [2,16]");
}

CoagulationMap::CoagulationMap(const CoagulationKernel& k, const Grid& grid, std::size_t points_per_cell)
    : kernel_(k), grid_(grid), n_(points_per_cell) {
  if (!grid.nodes_per_doubling())
    throw std::invalid_argument("the fixed-point map needs a grid with an integer number of nodes per doubling");
  half_ = static_cast<std::size_t>(*grid.nodes_per_doubling());
  const std::size_t N = grid.size();
  if (N < 3 * half_ + 8) throw std::invalid_argument("grid too short for the fixed-point map");
  const GaussRule& g = gauss_legendre(n_);
  const double h = grid.log_step();
  std::vector<double> c(n_);
  for (std::size_t i = 0; i < n_; ++i) c[i] = std::exp(h * g.nodes[i]);

  const std::ptrdiff_t dmax = static_cast<std::ptrdiff_t>(N) - 2;
  ktab_.resize(static_cast<std::size_t>(2 * dmax + 1) * n_ * n_);
  for (std::ptrdiff_t d = -dmax; d <= dmax; ++d)
    for (std::size_t gp = 0; gp < n_; ++gp)
      for (std::size_t gg = 0; gg < n_; ++gg)
        ktab_[(static_cast<std::size_t>(d + dmax) * n_ + gp) * n_ + gg] =
            k(1.0, std::exp(h * static_cast<double>(d)) * c[gg] / c[gp]);

  const std::ptrdiff_t emax = static_cast<std::ptrdiff_t>(N) - 1;
  lknode_.resize(static_cast<std::size_t>(2 * emax + 1) * n_);
  for (std::ptrdiff_t d = -emax; d <= emax; ++d)
    for (std::size_t gp = 0; gp < n_; ++gp)
      lknode_[static_cast<std::size_t>(d + emax) * n_ + gp] =
          std::log(k(1.0, std::exp(h * static_cast<double>(d)) / c[gp]));
}

std::vector<double> CoagulationMap::apply(const Profile& p) const {
  const Grid& grid = grid_;
  const std::size_t N = grid.size();
  if (p.grid().size() != N || p.grid().x_min() != grid.x_min() || p.grid().log_step() != grid.log_step())
    throw std::invalid_argument("apply_map: profile grid differs from the map grid");
  const std::size_t n = n_, k = half_;
  const double h = grid.log_step(), x0 = grid.x_min(), X = grid.x_max();
  const GaussRule& gl = gauss_legendre(n);
  const CellRule rule = p.cell_rule(n);
  const std::size_t P = (N - 1) * n;
  const std::ptrdiff_t dmax = static_cast<std::ptrdiff_t>(N) - 2;
  const std::ptrdiff_t emax = static_cast<std::ptrdiff_t>(N) - 1;

  std::vector<double> logf(N);
  for (std::size_t i = 0; i < N; ++i)
    logf[i] = p.values()[i] > 0.0 ? std::log(p.values()[i]) : -std::numeric_limits<double>::infinity();
  std::vector<char> log_ok(N - 1);
  for (std::size_t j = 0; j + 1 < N; ++j) {
    const std::size_t s0 = stencil_start(j, N);
    bool ok = true;
    for (std::size_t l = 0; l < 6; ++l) ok = ok && p.values()[s0 + l] > 0.0;
    log_ok[j] = ok;
  }

  // tail quadrature for the inner z-integral beyond x_max
  const GaussRule& lag = gauss_laguerre_scaled(kTailPoints);
  const double a = p.tail_rate();
  std::vector<double> tz(kTailPoints), tw(kTailPoints);
  for (std::size_t t = 0; t < kTailPoints; ++t) {
    tz[t] = X + lag.nodes[t] / a;
    tw[t] = lag.weights[t] / a * p.tail_value(tz[t]);
  }

  // cumulative inner integrals per outer point:
  //   TU[i] = int_{x_i}^inf K(y,z) f(z) dz,  TB[i] = int_{x_i}^{x_max} K(y,z) z f(z) dz
  std::vector<double> TU(P * N, 0.0), TB(P * N, 0.0);
  parallel_for(P, [&](std::size_t P_) {
    const std::size_t j = P_ / n, gp = P_ % n;
    const double y = rule.x[P_];
    double* tu = &TU[P_ * N];
    double* tb = &TB[P_ * N];
    double tail = 0.0;
    for (std::size_t t = 0; t < kTailPoints; ++t) tail += tw[t] * kernel_(y, tz[t]);
    tu[N - 1] = tail;
    tb[N - 1] = 0.0;
    const std::size_t i0 = j > k ? j - k : 0;
    for (std::size_t i = N - 1; i-- > i0;) {
      const double* kt =
          &ktab_[(static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(j) + dmax) * n + gp) * n];
      double su = 0.0, sb = 0.0;
      for (std::size_t g = 0; g < n; ++g) {
        const std::size_t q = i * n + g;
        const double v = rule.weight[q] * kt[g] * rule.f[q];
        su += v;
        sb += v * rule.x[q];
      }
      tu[i] = tu[i + 1] + su;
      tb[i] = tb[i + 1] + sb;
    }
  });

  // y below x0: Laguerre points in log(x0/y) on the head model. These y are off
  // the lattice, so their inner integrals are summed with direct kernel calls.
  const double alpha = kernel_.alpha();
  std::vector<double> vy, vw, vf;
  if (p.values()[0] > 0.0) {
    const double kap = std::max(0.5, p.head_exponent() + 2.0 - alpha);
    for (std::size_t t = 0; t < kTailPoints; ++t) {
      const double tt = lag.nodes[t] / kap;
      vy.push_back(x0 * std::exp(-tt));
      vw.push_back(lag.weights[t] / kap);
      vf.push_back(p.value(vy.back()));
    }
  }
  const std::size_t V = vy.size();
  std::vector<double> VU(V * N, 0.0), VB(V * N, 0.0);
  parallel_for(V, [&](std::size_t v) {
    const double y = vy[v];
    double* vu = &VU[v * N];
    double* vb = &VB[v * N];
    double tail = 0.0;
    for (std::size_t t = 0; t < kTailPoints; ++t) tail += tw[t] * kernel_(y, tz[t]);
    vu[N - 1] = tail;
    for (std::size_t i = N - 1; i-- > 0;) {
      double su = 0.0, sb = 0.0;
      for (std::size_t g = 0; g < n; ++g) {
        const std::size_t q = i * n + g;
        const double w = rule.weight[q] * kernel_(y, rule.x[q]) * rule.f[q];
        su += w;
        sb += w * rule.x[q];
      }
      vu[i] = vu[i + 1] + su;
      vb[i] = vb[i + 1] + sb;
    }
  });

  // inner integrals from s = x - y up to the node `top`, partial first cell by direct calls
  auto partial = [&](double y, double s, std::size_t lo, std::size_t hi, double& pu, double& pb) -> std::size_t {
    const double us = std::log(s / x0) / h;
    std::size_t is = static_cast<std::size_t>(std::max(0.0, std::floor(us)));
    is = std::clamp(is, lo, hi);
    const double span = static_cast<double>(is + 1) - us;
    pu = pb = 0.0;
    if (span > 0.0)
      for (std::size_t g = 0; g < n; ++g) {
        const double u = us + span * gl.nodes[g];
        const double z = x0 * std::exp(h * u);
        const double v = gl.weights[g] * span * h * z * kernel_(y, z) * p.value_at_position(u);
        pu += v;
        pb += v * z;
      }
    return is;
  };

  std::vector<double> T(N, 0.0);
  parallel_for(N - k - 1, [&](std::size_t idx) {
    const std::size_t m = idx + k + 1;
    const double x = grid[m];
    CompensatedSum acc;

    // y in [x/2, x]: inner integral starts at x/2 = x_{m-k}
    for (std::size_t P_ = (m - k) * n; P_ < m * n; ++P_)
      acc.add(rule.weight[P_] * rule.x[P_] * rule.f[P_] * TU[P_ * N + (m - k)]);

    // y in (0, x/2]: inner integral starts at s = x - y, inside a cell
    for (std::size_t P_ = 0; P_ < (m - k) * n; ++P_) {
      const std::size_t j = P_ / n, gp = P_ % n;
      const double y = rule.x[P_];
      const double s = x - y;
      const double us = std::log(s / x0) / h;
      std::size_t is = static_cast<std::size_t>(std::max(0.0, std::floor(us)));
      is = std::clamp(is, m - k, m - 1);
      const double span = static_cast<double>(is + 1) - us;
      double pu = 0.0, pb = 0.0;
      if (span > 0.0) {
        if (log_ok[is]) {
          const std::size_t s0 = stencil_start(is, N);
          double L[6];
          for (std::size_t l = 0; l < 6; ++l)
            L[l] = lknode_[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(s0 + l) - static_cast<std::ptrdiff_t>(j) + emax) * n + gp] +
                   logf[s0 + l];
          for (std::size_t g = 0; g < n; ++g) {
            const double u = us + span * gl.nodes[g];
            double w[6];
            lagrange6(u - static_cast<double>(s0), w);
            double lv = 0.0;
            for (std::size_t l = 0; l < 6; ++l) lv += w[l] * L[l];
            const double z = x0 * std::exp(h * u);
            const double v = gl.weights[g] * span * h * z * std::exp(lv);
            pu += v;
            pb += v * z;
          }
        } else {
          for (std::size_t g = 0; g < n; ++g) {
            const double u = us + span * gl.nodes[g];
            const double z = x0 * std::exp(h * u);
            const double v = gl.weights[g] * span * h * z * kernel_(y, z) * p.value_at_position(u);
            pu += v;
            pb += v * z;
          }
        }
      }
      const double U = TU[P_ * N + is + 1] + pu;
      const double B = TB[P_ * N + is + 1] - TB[P_ * N + m] + pb;
      const double phi = rule.f[P_] * (y * U + B);
      acc.add(rule.weight[P_] * phi);
    }
    for (std::size_t v = 0; v < V; ++v) {
      const double y = vy[v];
      double pu, pb;
      const std::size_t is = partial(y, x - y, m - k, m - 1, pu, pb);
      const double U = VU[v * N + is + 1] + pu;
      const double B = VB[v * N + is + 1] - VB[v * N + m] + pb;
      acc.add(vw[v] * y * vf[v] * (y * U + B));
    }
    T[m] = acc.value() / (x * x);
  });

  // first doubling: x^2 T = int_0^x (y f loss - gain) dy, every term positive
  std::vector<double> G, L;
  gain_loss_nodes(p, 2 * k + 1, G, L);
  std::vector<double> phi(2 * k + 1);
  for (std::size_t m = 0; m <= 2 * k; ++m) phi[m] = grid[m] * (grid[m] * p.values()[m] * L[m] - G[m]);
  // int_0^{x0} phi dy / y from the virtual points: loss over the whole profile, gain inside the head
  CompensatedSum below;
  for (std::size_t v = 0; v < V; ++v) {
    const double y = vy[v];
    const double loss = VU[v * N] + head_integral(p, alpha, x0, [&](double z) { return kernel_(y, z); });
    const double gain =
        y * head_integral(p, alpha, 0.5 * y, [&](double z) { return kernel_(z, y - z) * p.value(y - z); });
    below.add(vw[v] * y * (y * vf[v] * loss - gain));
  }
  T_head(phi, below.value(), T);
  return T;
}

void CoagulationMap::T_head(const std::vector<double>& phi, double below, std::vector<double>& T) const {
  // phi = y (y f loss - gain) at nodes 0..2k, integrated in log y; `below` covers (0, x0)
  const Grid& grid = grid_;
  const std::size_t k = half_;
  const double h = grid.log_step(), x0 = grid.x_min();
  bool positive = true;
  for (double v : phi) positive = positive && v > 0.0;
  double cum = below;
  T[0] = std::max(0.0, cum) / (x0 * x0);
  if (!positive) {
    // degenerate head: trapezoid
    for (std::size_t m = 1; m <= k; ++m) {
      cum += 0.5 * h * (phi[m - 1] + phi[m]);
      T[m] = std::max(0.0, cum) / (grid[m] * grid[m]);
    }
    return;
  }
  std::vector<double> lp(phi.size());
  for (std::size_t m = 0; m < phi.size(); ++m) lp[m] = std::log(phi[m]);
  const GaussRule& gr = gauss_legendre(4);
  for (std::size_t m = 1; m <= k; ++m) {
    const std::size_t a = m >= 2 ? m - 2 : 0;
    double acc = 0.0;
    for (std::size_t q = 0; q < gr.nodes.size(); ++q) {
      const double t = static_cast<double>(m - 1 - a) + gr.nodes[q];
      double v = 0.0;
      for (std::size_t b = 0; b < 4; ++b) {
        double lag = 1.0;
        for (std::size_t cc = 0; cc < 4; ++cc)
          if (cc != b) lag *= (t - static_cast<double>(cc)) / (static_cast<double>(b) - static_cast<double>(cc));
        v += lag * lp[a + b];
      }
      acc += gr.weights[q] * std::exp(v);
    }
    cum += h * acc;
    T[m] = cum / (grid[m] * grid[m]);
  }
}

void CoagulationMap::gain_loss(const Profile& p, std::vector<double>& gain, std::vector<double>& loss) const {
  gain_loss_nodes(p, grid_.size(), gain, loss);
}

void CoagulationMap::gain_loss_nodes(const Profile& p, std::size_t count, std::vector<double>& gain,
                                     std::vector<double>& loss) const {
  const Grid& grid = grid_;
  const std::size_t N = grid.size();
  if (p.grid().size() != N || p.grid().x_min() != grid.x_min() || p.grid().log_step() != grid.log_step())
    throw std::invalid_argument("gain_loss: profile grid differs from the map grid");
  const std::size_t n = n_, k = half_;
  const double x0 = grid.x_min(), X = grid.x_max();
  const CellRule rule = p.cell_rule(n);
  const std::ptrdiff_t emax = static_cast<std::ptrdiff_t>(N) - 1;
  const double alpha = kernel_.alpha();
  const GaussRule& lag = gauss_laguerre_scaled(kTailPoints);
  auto head = [&](double b, auto&& g) { return head_integral(p, alpha, b, g); };

  const double a = p.tail_rate();
  std::vector<double> tz(kTailPoints), tw(kTailPoints);
  for (std::size_t t = 0; t < kTailPoints; ++t) {
    tz[t] = X + lag.nodes[t] / a;
    tw[t] = lag.weights[t] / a * p.tail_value(tz[t]);
  }

  gain.assign(count, 0.0);
  loss.assign(count, 0.0);
  parallel_for(count, [&](std::size_t m) {
    const double x = grid[m];
    CompensatedSum l;
    l.add(head(x0, [&](double z) { return kernel_(x, z); }));
    for (std::size_t q = 0; q < rule.x.size(); ++q) {
      const std::size_t i = q / n, g = q % n;
      const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(m) - static_cast<std::ptrdiff_t>(i);
      l.add(rule.weight[q] * rule.f[q] * std::exp(lknode_[static_cast<std::size_t>(d + emax) * n + g]));
    }
    for (std::size_t t = 0; t < kTailPoints; ++t) l.add(tw[t] * kernel_(x, tz[t]));
    loss[m] = l.value();

    // symmetric form: x int_0^{x/2} K(y, x-y) f(y) f(x-y) dy
    CompensatedSum gs;
    gs.add(head(std::min(x0, 0.5 * x), [&](double y) { return kernel_(y, x - y) * p.value(x - y); }));
    if (m > k) {
      for (std::size_t q = 0; q < (m - k) * n; ++q) {
        const double y = rule.x[q];
        gs.add(rule.weight[q] * rule.f[q] * kernel_(y, x - y) * p.value(x - y));
      }
    }
    gain[m] = x * gs.value();
  });
}

Profile apply_map(const CoagulationKernel& k, const Profile& p) {
  CoagulationMap map(k, p.grid());
  return refit_tail(Profile(p.grid(), map.apply(p), p.tail_rate(), 0.0));
}

namespace {

double relative_defect(const Profile& p, const std::vector<double>& T, double lo, double hi) {
  double worst = 0.0;
  for (std::size_t i = 0; i < T.size(); ++i) {
    const double x = p.grid()[i];
    if (x < lo || x > hi) continue;
    const double f = p.values()[i];
    worst = std::max(worst, std::fabs(f - T[i]) / (f + 1e-300));
  }
  return worst;
}

Profile resample(const Profile& p, const Grid& grid) {
  if (p.grid().size() == grid.size() && p.grid().x_min() == grid.x_min() && p.grid().log_step() == grid.log_step())
    return p;
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = p.value(grid[i]);
  return Profile::with_fitted_tail(grid, std::move(v));
}

}  // namespace

double residual(const CoagulationKernel& k, const Profile& p) {
  CoagulationMap map(k, p.grid());
  return relative_defect(p, map.apply(p), 1e-3, 40.0);
}

SolveResult solve(const CoagulationKernel& k, const Profile& seed, const SolveSettings& s) {
  return solve(k, seed, s, seed.grid());
}

namespace {

double safe_log(double v) { return std::log(std::max(v, 1e-300)); }

// Integral over [m-1, m] (unit spacing) of the cubic through 4 consecutive samples
// starting at a; pos = m - 1 - a in {0, 1, 2}.
constexpr double kCubicStep[3][4] = {{9, 19, -5, 1}, {-1, 13, 13, -1}, {1, -5, 19, 9}};

// integral over a log-step of a positive function, log-linear between the ends
double loglinear_step(double a, double b, double h) {
  if (!(a > 0.0 && b > 0.0)) return 0.5 * h * (a + b);
  const double r = std::log(b / a);
  if (std::fabs(r) < 1e-8) return h * a * (1.0 + 0.5 * r);
  return h * (b - a) / r;
}

double weighted_change(const Profile& a, const Profile& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double x = a.grid()[i];
    worst = std::max(worst, std::fabs(a.values()[i] - b.values()[i]) * x * (1.0 + x) * (1.0 + x));
  }
  return worst;
}

Profile finish(const Grid& grid, std::vector<double> v, double rate) {
  for (double& x : v)
    if (!(x >= 0.0)) x = 0.0;
  return normalize_mass(refit_tail(Profile(grid, std::move(v), rate, 0.0)));
}

// One step of d/dtau (x f) = d/dx [x^2 (f - T f)] over tau = j h, gain and loss frozen.
// Along x e^sigma the exact shift is e^{2 sigma} f(x e^sigma); the gain is
// integrated along that path so the tail stays balanced for any step.
Profile pseudo_time_step(const CoagulationMap& map, const Profile& f, std::size_t j) {
  const Grid& grid = f.grid();
  const std::size_t N = grid.size();
  const double h = grid.log_step(), X = grid.x_max();
  std::vector<double> G, L;
  map.gain_loss(f, G, L);
  std::vector<double> S(N + j), LL(N + j), F(N + j);
  for (std::size_t i = 0; i < N; ++i) {
    S[i] = G[i] / grid[i];
    LL[i] = L[i];
    F[i] = f.values()[i];
  }
  const double s_slope = (S[N - 1] > 0.0 && S[N - 2] > 0.0) ? std::log(S[N - 1] / S[N - 2]) / (grid[N - 1] - grid[N - 2]) : 0.0;
  const double l_slope = (LL[N - 1] > 0.0 && LL[N - 2] > 0.0) ? std::log(LL[N - 1] / LL[N - 2]) / h : 0.0;
  for (std::size_t i = N; i < N + j; ++i) {
    const double u = static_cast<double>(i - (N - 1)) * h;
    const double x = X * std::exp(u);
    S[i] = S[N - 1] * std::exp(s_slope * (x - X));
    LL[i] = LL[N - 1] * std::exp(l_slope * u);
    F[i] = f.value(x);
  }
  // cubic Lagrange in sigma on 4 of the j+1 path nodes, Gauss points per sub-step
  const GaussRule& gr = gauss_legendre(4);
  std::vector<double> nv(N);
  parallel_for(N, [&](std::size_t i) {
    std::vector<double> cum(j + 1, 0.0), li(j + 1);
    for (std::size_t m = 1; m <= j; ++m) {
      // 4-point rule for the integral of L over [m-1, m]
      const std::size_t a = std::min(m >= 2 ? m - 2 : 0, j - 3);
      const double* l = &LL[i + a];
      const std::size_t pos = m - 1 - a;
      const double* w = kCubicStep[pos];
      cum[m] = cum[m - 1] + h / 24.0 * (w[0] * l[0] + w[1] * l[1] + w[2] * l[2] + w[3] * l[3]);
    }
    bool positive = true;
    for (std::size_t m = 0; m <= j; ++m) {
      const double v = std::exp(2.0 * static_cast<double>(m) * h - cum[m]) * S[i + m];
      positive = positive && v > 0.0;
      li[m] = positive ? std::log(v) : 0.0;
    }
    double acc = 0.0;
    for (std::size_t m = 1; m <= j; ++m) {
      if (!positive) {
        acc += loglinear_step(std::exp(2.0 * static_cast<double>(m - 1) * h - cum[m - 1]) * S[i + m - 1],
                              std::exp(2.0 * static_cast<double>(m) * h - cum[m]) * S[i + m], h);
        continue;
      }
      const std::size_t a = std::min(m >= 2 ? m - 2 : 0, j - 3);
      for (std::size_t q = 0; q < gr.nodes.size(); ++q) {
        const double t = static_cast<double>(m - 1 - a) + gr.nodes[q];
        double v = 0.0;
        for (std::size_t b = 0; b < 4; ++b) {
          double lag = 1.0;
          for (std::size_t c = 0; c < 4; ++c)
            if (c != b) lag *= (t - static_cast<double>(c)) / (static_cast<double>(b) - static_cast<double>(c));
          v += lag * li[a + b];
        }
        acc += h * gr.weights[q] * std::exp(v);
      }
    }
    nv[i] = std::exp(2.0 * static_cast<double>(j) * h - cum[j]) * F[i + j] + acc;
  });
  return finish(grid, std::move(nv), f.tail_rate());
}

// Same path integration, but the source is rebuilt from T so the only fixed point is
// f = T f:  f <- T f + e^{2s - Lam(s)} w(x e^s) + int_0^s L e^{2 sig - Lam(sig)} w(x e^sig),
// w = f - T f. Any positive L gives the same fixed point; it sets the local damping.
Profile consistent_step(const Profile& f, const std::vector<double>& T, const std::vector<double>& L, std::size_t j) {
  const Grid& grid = f.grid();
  const std::size_t N = grid.size();
  const double h = grid.log_step();
  const Profile Tp = refit_tail(Profile(grid, T, f.tail_rate(), 0.0));
  std::vector<double> W(N + j), LL(N + j);
  for (std::size_t i = 0; i < N; ++i) {
    W[i] = f.values()[i] - T[i];
    LL[i] = L[i];
  }
  const double l_slope = (L[N - 1] > 0.0 && L[N - 2] > 0.0) ? std::log(L[N - 1] / L[N - 2]) / h : 0.0;
  for (std::size_t i = N; i < N + j; ++i) {
    const double u = static_cast<double>(i - (N - 1)) * h;
    const double x = grid.x_max() * std::exp(u);
    W[i] = f.value(x) - Tp.value(x);
    LL[i] = L[N - 1] * std::exp(l_slope * u);
  }
  std::vector<double> nv(N);
  parallel_for(N, [&](std::size_t i) {
    std::vector<double> cum(j + 1, 0.0), q(j + 1);
    for (std::size_t m = 1; m <= j; ++m) {
      const std::size_t a = std::min(m >= 2 ? m - 2 : 0, j - 3);
      const double* l = &LL[i + a];
      const double* w = kCubicStep[m - 1 - a];
      cum[m] = cum[m - 1] + h / 24.0 * (w[0] * l[0] + w[1] * l[1] + w[2] * l[2] + w[3] * l[3]);
    }
    for (std::size_t m = 0; m <= j; ++m)
      q[m] = LL[i + m] * std::exp(2.0 * static_cast<double>(m) * h - cum[m]) * W[i + m];
    double acc = 0.0;
    for (std::size_t m = 1; m <= j; ++m) {
      const std::size_t a = std::min(m >= 2 ? m - 2 : 0, j - 3);
      const double* w = kCubicStep[m - 1 - a];
      acc += h / 24.0 * (w[0] * q[a] + w[1] * q[a + 1] + w[2] * q[a + 2] + w[3] * q[a + 3]);
    }
    nv[i] = T[i] + std::exp(2.0 * static_cast<double>(j) * h - cum[j]) * W[i + j] + acc;
  });
  return finish(grid, std::move(nv), Tp.tail_rate());
}

// Anderson mixing in log f, least squares by ridge-regularized normal equations
class Anderson {
 public:
  explicit Anderson(std::size_t depth) : depth_(depth) {}
  void reset() {
    dx_.clear();
    dr_.clear();
    xprev_.clear();
  }
  std::vector<double> next(const std::vector<double>& x, const std::vector<double>& r) {
    const std::size_t N = x.size();
    if (!xprev_.empty()) {
      std::vector<double> a(N), b(N);
      for (std::size_t i = 0; i < N; ++i) {
        a[i] = x[i] - xprev_[i];
        b[i] = r[i] - rprev_[i];
      }
      dx_.push_back(std::move(a));
      dr_.push_back(std::move(b));
      if (dx_.size() > depth_) {
        dx_.erase(dx_.begin());
        dr_.erase(dr_.begin());
      }
    }
    xprev_ = x;
    rprev_ = r;
    const std::size_t m = dr_.size();
    std::vector<double> out(N);
    for (std::size_t i = 0; i < N; ++i) out[i] = x[i] + r[i];
    if (m == 0) return out;
    std::vector<double> A(m * m), gam(m);
    double tr = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = 0; q < m; ++q) {
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i) acc += dr_[p][i] * dr_[q][i];
        A[p * m + q] = acc;
      }
      double acc = 0.0;
      for (std::size_t i = 0; i < N; ++i) acc += dr_[p][i] * r[i];
      gam[p] = acc;
      tr += A[p * m + p];
    }
    if (!(tr > 0.0)) return out;
    for (std::size_t p = 0; p < m; ++p) A[p * m + p] += 1e-12 * tr / static_cast<double>(m);
    for (std::size_t p = 0; p < m; ++p) {
      std::size_t piv = p;
      for (std::size_t q = p + 1; q < m; ++q)
        if (std::fabs(A[q * m + p]) > std::fabs(A[piv * m + p])) piv = q;
      for (std::size_t c = 0; c < m; ++c) std::swap(A[p * m + c], A[piv * m + c]);
      std::swap(gam[p], gam[piv]);
      for (std::size_t q = p + 1; q < m; ++q) {
        const double fct = A[q * m + p] / A[p * m + p];
        for (std::size_t c = p; c < m; ++c) A[q * m + c] -= fct * A[p * m + c];
        gam[q] -= fct * gam[p];
      }
    }
    for (std::size_t p = m; p-- > 0;) {
      double acc = gam[p];
      for (std::size_t c = p + 1; c < m; ++c) acc -= A[p * m + c] * gam[c];
      gam[p] = acc / A[p * m + p];
    }
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t i = 0; i < N; ++i) out[i] -= gam[p] * (dx_[p][i] + dr_[p][i]);
    return out;
  }

 private:
  std::size_t depth_;
  std::vector<std::vector<double>> dx_, dr_;
  std::vector<double> xprev_, rprev_;
};

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

SolveResult solve(const CoagulationKernel& k, const Profile& seed, const SolveSettings& s, const Grid& grid) {
  s.check();
  Profile f = normalize_mass(resample(seed, grid));
  CoagulationMap map(k, grid, s.refinement);
  const std::size_t N = grid.size();
  const std::size_t half = static_cast<std::size_t>(*grid.nodes_per_doubling());
  // pseudo-time step of omega doublings (at least 4 nodes for the path rules)
  const std::size_t j = std::max<std::size_t>(4, static_cast<std::size_t>(std::lround(s.omega * static_cast<double>(half))));
  const double step = static_cast<double>(j) * grid.log_step();

  SolveResult out{f, 0.0, 0, false, std::numeric_limits<double>::infinity(), 1.0, {}};
  std::size_t used = 0;
  auto fail = [&](const std::string& why) {
    out.profile = f;
    out.iterations = used;
    std::ostringstream msg;
    msg << why << " after " << used << " iterations";
    out.diagnostic = msg.str();
    return out;
  };

  try {
    std::vector<double> T = map.apply(f);
    if (!all_finite(T)) return fail("map produced non-finite values");

    // far from the profile: march with explicit gain until the transient is gone
    if (relative_defect(f, T, 1e-3, 40.0) > 1e-2) {
      for (;;) {
        if (used >= s.max_iterations) return fail("pseudo-time march did not settle");
        Profile next = pseudo_time_step(map, f, j);
        ++used;
        double ch = 0.0;
        for (std::size_t i = 0; i < N; ++i)
          ch = std::max(ch, std::fabs(safe_log(next.values()[i]) - safe_log(f.values()[i])) / step);
        f = std::move(next);
        if (ch < 1e-2) break;
      }
    }

    std::vector<double> gain, loss;
    map.gain_loss(f, gain, loss);
    Anderson acc(5);
    Profile best = f;
    double best_res = std::numeric_limits<double>::infinity(), best_lambda = 1.0, best_change = out.last_change;
    std::size_t best_at = used;
    for (;;) {
      T = map.apply(f);
      if (!all_finite(T)) return fail("map produced non-finite values");
      const double lambda = mass(refit_tail(Profile(grid, T, f.tail_rate(), 0.0)));
      const Profile g = consistent_step(f, T, loss, j);
      const double ch = weighted_change(g, f);
      const double res = relative_defect(f, T, 1e-3, 40.0);
      out.dilation = lambda;
      out.last_change = ch;
      if (res < best_res) {
        best = f;
        best_res = res;
        best_lambda = lambda;
        best_change = ch;
        best_at = used;
      }
      if (ch <= s.tolerance && res <= 10.0 * s.tolerance) break;
      // stalled: keep the best iterate seen
      if (used >= s.max_iterations || used - best_at >= 40) {
        f = best;
        out.dilation = best_lambda;
        out.last_change = best_change;
        break;
      }
      if (res > 10.0 * best_res) {
        f = best;
        acc.reset();
        ++used;
        continue;
      }
      std::vector<double> x(N), r(N);
      for (std::size_t i = 0; i < N; ++i) {
        x[i] = safe_log(f.values()[i]);
        r[i] = safe_log(g.values()[i]) - x[i];
      }
      const std::vector<double> xn = acc.next(x, r);
      std::vector<double> nv(N);
      for (std::size_t i = 0; i < N; ++i) nv[i] = std::exp(xn[i]);
      f = finish(grid, std::move(nv), g.tail_rate());
      ++used;
    }

    T = map.apply(f);
    out.profile = f;
    out.iterations = used;
    out.residual = relative_defect(f, T, 1e-3, 40.0);
    out.converged = out.residual <= 10.0 * s.tolerance && out.last_change <= s.tolerance;
    if (!out.converged) {
      std::ostringstream msg;
      msg << "no convergence after " << used << " iterations (change " << out.last_change << ", residual "
          << out.residual << ")";
      out.diagnostic = msg.str();
    }
    return out;
  } catch (const std::exception& e) {
    return fail(std::string("solver left the admissible class: ") + e.what());
  }
}

std::vector<std::string> builtin_seed_names() { return {"exp", "gamma2", "perturbed", "wide"}; }

Profile builtin_seed(const std::string& name, const Grid& grid) {
  if (name == "exp") return normalize_mass(Profile::exponential(grid));
  if (name == "gamma2") return normalize_mass(Profile::sample(grid, [](double x) { return 4.0 * x * std::exp(-2.0 * x); }));
  if (name == "perturbed")
    return normalize_mass(
        Profile::sample(grid, [](double x) { return std::max(0.0, 1.0 + 0.1 * (1.0 - x)) * std::exp(-x); }));
  if (name == "wide")
    return normalize_mass(Profile::sample(grid, [](double x) { return std::exp(-x / 2.0) / (1.0 + x); }));
  throw std::invalid_argument("unknown builtin seed '" + name + "'");
}

}  // namespace smolu

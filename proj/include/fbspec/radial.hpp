#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "rate_model.hpp"

namespace fbspec {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

// Gauss–Legendre rule on [-1,1] with barycentric interpolation weights.
struct GaussRule {
  std::vector<double> x, w, bary;
};

namespace detail {

template <unsigned N>
GaussRule make_rule() {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& ab = G::abscissa();
  const auto& wt = G::weights();
  GaussRule g;
  // Boost stores the non-negative half, zero first for odd N.
  for(int i = int(ab.size()) - 1; i >= 0; --i) {
    if(ab[i] == 0.0) continue;
    g.x.push_back(-ab[i]);
    g.w.push_back(wt[i]);
  }
  for(size_t i = 0; i < ab.size(); ++i) {
    g.x.push_back(ab[i]);
    g.w.push_back(wt[i]);
  }
  // Barycentric weights for Gauss points: (-1)^j sqrt((1-x_j^2) w_j).
  for(size_t j = 0; j < g.x.size(); ++j) {
    double b = std::sqrt((1 - g.x[j] * g.x[j]) * g.w[j]);
    g.bary.push_back(j % 2 ? -b : b);
  }
  return g;
}

}  // namespace detail

inline const GaussRule& gauss_rule(int q) {
  static const GaussRule r8 = detail::make_rule<8>(), r10 = detail::make_rule<10>(),
                         r12 = detail::make_rule<12>(), r15 = detail::make_rule<15>(),
                         r20 = detail::make_rule<20>(), r25 = detail::make_rule<25>(),
                         r30 = detail::make_rule<30>();
  switch(q) {
    case 8: return r8;
    case 10: return r10;
    case 12: return r12;
    case 15: return r15;
    case 20: return r20;
    case 25: return r25;
    case 30: return r30;
    default: throw InputError("gauss_rule: unsupported order " + std::to_string(q));
  }
}

// Lagrange basis of a rule evaluated at x.
inline void basis_at(const GaussRule& g, double x, double* out) {
  const int q = int(g.x.size());
  for(int j = 0; j < q; ++j) {
    if(x == g.x[j]) {
      for(int k = 0; k < q; ++k) out[k] = (k == j);
      return;
    }
  }
  double den = 0;
  for(int j = 0; j < q; ++j) {
    out[j] = g.bary[j] / (x - g.x[j]);
    den += out[j];
  }
  for(int j = 0; j < q; ++j) out[j] /= den;
}

enum class PanelKind { log_r, lin_r };

// One panel of the composite grid. Log panels are affine in ln r, linear
// panels affine in r; s = R − r is carried exactly for the latter.
struct Panel {
  PanelKind kind;
  double a, b;    // r range
  double sa, sb;  // R − a, R − b
  double ta, tb;  // ln a, ln b

  double lnr(double x) const {
    return kind == PanelKind::log_r ? 0.5 * (ta + tb) + 0.5 * (tb - ta) * x : std::log(r(x));
  }
  double r(double x) const {
    return kind == PanelKind::log_r ? std::exp(lnr(x)) : a + 0.5 * (b - a) * (x + 1);
  }
  double s(double x, double R) const {
    return kind == PanelKind::log_r ? R - r(x) : sa - 0.5 * (sa - sb) * (x + 1);
  }
  double jac(double x) const {
    return kind == PanelKind::log_r ? 0.5 * (tb - ta) * r(x) : 0.5 * (b - a);
  }
  // r / (dr/dx); used for r·d/dr.
  double r_over_jac(double x) const {
    return kind == PanelKind::log_r ? 2.0 / (tb - ta) : r(x) / jac(x);
  }
  double x_of(double rr) const {
    if(kind == PanelKind::log_r) return (2 * std::log(rr) - ta - tb) / (tb - ta);
    return 2 * (rr - a) / (b - a) - 1;
  }
};

struct GridSpec {
  int order = 15;
  int panels_center = 14;
  int panels_mid = 4;
  int panels_edge = 16;

  static GridSpec from_nodes(int nodes, int order = 15) {
    int P = (nodes - 2) / order;
    if(P < 12 || (nodes - 2) % order) {
      throw InputError("grid: node count must be 2 + order*panels with at least 12 panels");
    }
    GridSpec g;
    g.order = order;
    g.panels_edge = std::max(4, int(std::lround(P * 16.0 / 34.0)));
    g.panels_mid = std::max(2, int(std::lround(P * 4.0 / 34.0)));
    g.panels_center = P - g.panels_edge - g.panels_mid;
    return g;
  }
};

class Grid {
public:
  double R = 0;
  double r_center = 0;  // innermost panel boundary; [0, r_center] is a tail
  int q = 0;
  std::vector<Panel> panels;
  Vec r, s, lnr, jac, wq, xloc;
  std::vector<int> panel_of, local_of;

  static Grid build(double R, double r_center, const GridSpec& spec) {
    if(!(r_center > 0 && r_center < R / 8)) throw InputError("grid: bad center radius");
    std::vector<Panel> ps;
    // Center: log panels, widths growing geometrically toward r = 0.
    double t_top = std::log(R / 4), t_bot = std::log(r_center);
    double depth = t_top - t_bot;
    int nc = spec.panels_center;
    double w0 = std::min(std::log(2.0), depth / nc);
    auto total = [&](double beta) {
      return std::abs(beta - 1) < 1e-14 ? w0 * nc : w0 * (std::pow(beta, nc) - 1) / (beta - 1);
    };
    double lo = 1.0, hi = 2.0;
    while(total(hi) < depth) hi *= 2;
    for(int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      (total(mid) < depth ? lo : hi) = mid;
    }
    double beta = 0.5 * (lo + hi);
    std::vector<double> tb{t_top};
    for(int j = 0; j < nc; ++j) tb.push_back(tb.back() - w0 * std::pow(beta, j));
    tb.back() = t_bot;
    for(int j = nc; j > 0; --j) {
      Panel p{PanelKind::log_r, std::exp(tb[j]), std::exp(tb[j - 1]), 0, 0, tb[j], tb[j - 1]};
      p.sa = R - p.a;
      p.sb = R - p.b;
      ps.push_back(p);
    }
    ps.back().b = R / 4;
    ps.back().sb = R - R / 4;
    // Middle: uniform linear panels on [R/4, 3R/4].
    int nm = spec.panels_mid;
    for(int j = 0; j < nm; ++j) {
      double a = R / 4 + (R / 2) * j / nm, b = R / 4 + (R / 2) * (j + 1) / nm;
      double sa = 3 * R / 4 - (R / 2) * j / nm, sb = 3 * R / 4 - (R / 2) * (j + 1) / nm;
      ps.push_back({PanelKind::lin_r, a, b, sa, sb, std::log(a), std::log(b)});
    }
    // Edge: geometric in s = R − r down to (R/4)·2^−15, then one panel to R.
    // More panels refine the levels instead of deepening them.
    int ne = spec.panels_edge;
    auto edge = [&](int j) { return (R / 4) * std::exp2(-15.0 * j / (ne - 1)); };
    for(int j = 0; j < ne; ++j) {
      double sa = edge(j);
      double sb = j + 1 < ne ? edge(j + 1) : 0.0;
      ps.push_back({PanelKind::lin_r, R - sa, R - sb, sa, sb, std::log(R - sa), std::log(R - sb)});
    }
    return Grid(R, r_center, spec.order, std::move(ps));
  }

  Grid(double R_, double rc, int order, std::vector<Panel> ps)
      : R(R_), r_center(rc), q(order), panels(std::move(ps)) {
    const GaussRule& g = rule();
    int N = int(panels.size()) * q;
    r.resize(N); s.resize(N); lnr.resize(N); jac.resize(N); wq.resize(N); xloc.resize(N);
    panel_of.resize(N); local_of.resize(N);
    for(size_t p = 0; p < panels.size(); ++p) {
      for(int j = 0; j < q; ++j) {
        int i = int(p) * q + j;
        const Panel& P = panels[p];
        double x = g.x[j];
        r[i] = P.r(x);
        s[i] = P.s(x, R);
        lnr[i] = P.lnr(x);
        jac[i] = P.jac(x);
        wq[i] = g.w[j] * jac[i];
        xloc[i] = x;
        panel_of[i] = int(p);
        local_of[i] = j;
      }
    }
    build_diff();
  }

  // Every panel split in two in its own variable.
  Grid refined() const {
    std::vector<Panel> ps;
    for(const Panel& P : panels) {
      Panel L = P, U = P;
      if(P.kind == PanelKind::log_r) {
        double tm = 0.5 * (P.ta + P.tb);
        L.tb = U.ta = tm;
        L.b = U.a = std::exp(tm);
        L.sb = U.sa = R - L.b;
      } else {
        double sm = 0.5 * (P.sa + P.sb);
        L.b = U.a = 0.5 * (P.a + P.b);
        L.sb = U.sa = sm;
        L.tb = U.ta = std::log(L.b);
      }
      ps.push_back(L);
      ps.push_back(U);
    }
    return Grid(R, r_center, q, std::move(ps));
  }

  const GaussRule& rule() const { return gauss_rule(q); }
  int size() const { return int(r.size()); }
  int num_panels() const { return int(panels.size()); }

  // Abscissae including both endpoints.
  Vec abscissae() const {
    Vec out(size() + 2);
    out[0] = 0;
    out.segment(1, size()) = r;
    out[size() + 1] = R;
    return out;
  }

  int locate(double rr) const {
    if(rr <= panels.front().b) return 0;
    if(rr >= panels.back().a) return num_panels() - 1;
    int lo = 0, hi = num_panels() - 1;
    while(lo < hi) {
      int mid = (lo + hi) / 2;
      if(panels[mid].b < rr) lo = mid + 1; else hi = mid;
    }
    return lo;
  }

  // Interpolate panel data F (interior nodes) at panel p, local x.
  double interp(const Vec& F, int p, double x) const {
    std::vector<double> l(q);
    basis_at(rule(), x, l.data());
    double acc = 0;
    for(int j = 0; j < q; ++j) acc += l[j] * F[p * q + j];
    return acc;
  }

  double interp_r(const Vec& F, double rr) const {
    if(rr <= r_center) return interp(F, 0, -1.0);
    int p = locate(rr);
    return interp(F, p, std::clamp(panels[p].x_of(rr), -1.0, 1.0));
  }

  double left_limit(const Vec& F) const { return interp(F, 0, -1.0); }
  double right_limit(const Vec& F) const { return interp(F, num_panels() - 1, 1.0); }

  // dF/dr at nodes.
  Vec derivative(const Vec& F) const {
    Vec out(size());
    for(int p = 0; p < num_panels(); ++p) {
      Vec dx = D_ * F.segment(p * q, q);
      for(int j = 0; j < q; ++j) out[p * q + j] = dx[j] / jac[p * q + j];
    }
    return out;
  }

  // r·dF/dr at nodes, without forming 1/r.
  Vec r_derivative(const Vec& F) const {
    Vec out(size());
    for(int p = 0; p < num_panels(); ++p) {
      Vec dx = D_ * F.segment(p * q, q);
      for(int j = 0; j < q; ++j) out[p * q + j] = dx[j] * panels[p].r_over_jac(rule().x[j]);
    }
    return out;
  }

  double integrate(const Vec& F) const { return wq.dot(F); }

private:
  void build_diff() {
    const GaussRule& g = rule();
    D_.resize(q, q);
    for(int i = 0; i < q; ++i) {
      double acc = 0;
      for(int j = 0; j < q; ++j) {
        if(i == j) continue;
        D_(i, j) = (g.bary[j] / g.bary[i]) / (g.x[i] - g.x[j]);
        acc += D_(i, j);
      }
      D_(i, i) = -acc;
    }
  }

  Mat D_;
};

using GridPtr = std::shared_ptr<const Grid>;

// Samples of f on a grid, stored as F = (r/R)^scale · f so that F stays
// bounded near r = 0. Endpoint exponents describe f ~ c r^a0, c (R−r)^a1.
struct RadialFn {
  GridPtr grid;
  Vec F;
  double scale = 0;
  double a0 = std::numeric_limits<double>::quiet_NaN();
  double a1 = std::numeric_limits<double>::quiet_NaN();

  RadialFn() = default;
  RadialFn(GridPtr g, Vec v, double sc = 0) : grid(std::move(g)), F(std::move(v)), scale(sc) {}

  int size() const { return int(F.size()); }

  double unscale(double stored, double rr) const {
    if(scale == 0) return stored;
    return stored * std::exp(-scale * std::log(rr / grid->R));
  }

  double node(int i) const { return unscale(F[i], grid->r[i]); }
  Vec nodes() const {
    Vec out(size());
    for(int i = 0; i < size(); ++i) out[i] = node(i);
    return out;
  }

  double at_zero() const {
    double L = grid->left_limit(F);
    if(scale <= 0) return scale == 0 ? L : 0.0;
    return L == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), L);
  }
  double at_R() const { return grid->right_limit(F); }

  // True values on abscissae() (endpoints are limits).
  Vec full() const {
    Vec out(size() + 2);
    out[0] = at_zero();
    out.segment(1, size()) = nodes();
    out[size() + 1] = at_R();
    return out;
  }

  double operator()(double rr) const {
    if(rr >= grid->R) return at_R();
    if(rr <= 0) return at_zero();
    return unscale(grid->interp_r(F, rr), rr);
  }

  // Same function re-expressed at a larger scale (more decay at 0).
  RadialFn rescaled(double new_scale) const {
    if(new_scale < scale) throw InputError("RadialFn: scale can only grow");
    RadialFn out = *this;
    out.scale = new_scale;
    double d = new_scale - scale;
    if(d != 0) {
      for(int i = 0; i < size(); ++i) out.F[i] *= std::exp(d * std::log(grid->r[i] / grid->R));
    }
    return out;
  }
};

// (r/R)^e at every node.
inline Vec node_power(const Grid& g, double e) {
  Vec out(g.size());
  for(int i = 0; i < g.size(); ++i) out[i] = std::exp(e * std::log(g.r[i] / g.R));
  return out;
}

// Product-integration weights for power kernels: F is interpolated on each
// panel, the kernel and Jacobian are integrated by a 20-point rule on
// pieces of at most 4 e-folds.
namespace detail {

struct Piece {
  double x0, x1;
};

inline double x_at_lnr(const Panel& P, double l) {
  if(P.kind == PanelKind::log_r) return std::clamp((2 * l - P.ta - P.tb) / (P.tb - P.ta), -1.0, 1.0);
  return std::clamp(P.x_of(std::exp(l)), -1.0, 1.0);
}

// Pieces of [x0,x1] uniform in ln r, each spanning at most 4 e-folds of an
// integrand with log-slope c; the part decayed below e^-45 is dropped.
inline std::vector<Piece> split(const Panel& P, double x0, double x1, double c) {
  std::vector<Piece> out;
  if(x1 <= x0) return out;
  double l0 = P.lnr(x0), l1 = P.lnr(x1);
  double keep = c != 0 ? 45.0 / std::abs(c) : l1 - l0;
  // Clip to the window next to the end where the integrand is largest.
  if(l1 - l0 > keep) {
    if(c < 0) { l1 = l0 + keep; x1 = x_at_lnr(P, l1); }
    else { l0 = l1 - keep; x0 = x_at_lnr(P, l0); }
  }
  double span = l1 - l0;
  int n = std::max(1, int(std::ceil(std::abs(c) * span / 4.0)));
  for(int k = 0; k < n; ++k) {
    double xa = k == 0 ? x0 : x_at_lnr(P, l0 + span * k / n);
    double xb = k == n - 1 ? x1 : x_at_lnr(P, l0 + span * (k + 1) / n);
    if(xb > xa) out.push_back({xa, xb});
  }
  return out;
}

// Adds ∫_{x0}^{x1} exp(A·(ln r(x) − lref)) ℓ_j(x) r'(x) dx to out[j].
inline void moments(const Grid& g, int p, double x0, double x1, double A, double lref, double* out) {
  const Panel& P = g.panels[p];
  const GaussRule& sub = gauss_rule(20);
  double c = A + (P.kind == PanelKind::log_r ? 1.0 : 0.0);
  std::vector<double> l(g.q);
  for(const Piece& pc : split(P, x0, x1, c)) {
    double h = 0.5 * (pc.x1 - pc.x0), m = 0.5 * (pc.x1 + pc.x0);
    for(size_t k = 0; k < sub.x.size(); ++k) {
      double x = m + h * sub.x[k];
      double wgt = sub.w[k] * h * std::exp(A * (P.lnr(x) - lref)) * P.jac(x);
      basis_at(g.rule(), x, l.data());
      for(int j = 0; j < g.q; ++j) out[j] += wgt * l[j];
    }
  }
}

}  // namespace detail

// (U F)_i = ∫_{r_i}^R (r_i/ρ)^A F(ρ) dρ.
inline Mat up_kernel(const Grid& g, double A) {
  const int N = g.size(), q = g.q, P = g.num_panels();
  Mat M = Mat::Zero(N, N);
  // Full-panel moments normalized at the lower panel end.
  Mat mom(P, q);
  for(int p = 0; p < P; ++p) {
    std::vector<double> m(q, 0.0);
    detail::moments(g, p, -1.0, 1.0, -A, g.panels[p].ta, m.data());
    for(int j = 0; j < q; ++j) mom(p, j) = m[j];
  }
  std::vector<double> m(q);
  for(int i = 0; i < N; ++i) {
    int pi = g.panel_of[i];
    std::fill(m.begin(), m.end(), 0.0);
    detail::moments(g, pi, g.xloc[i], 1.0, -A, g.lnr[i], m.data());
    for(int j = 0; j < q; ++j) M(i, pi * q + j) = m[j];
    for(int p = pi + 1; p < P; ++p) {
      double le = A * (g.lnr[i] - g.panels[p].ta);
      if(le < -700) break;
      double f = std::exp(le);
      for(int j = 0; j < q; ++j) M(i, p * q + j) = f * mom(p, j);
    }
  }
  return M;
}

// (D F)_i = ∫_0^{r_i} (ρ/r_i)^A F(ρ) dρ. The tail [0, r_center] assumes
// F ≈ F(r_1)(ρ/r_1)^tail_exp.
inline Mat down_kernel(const Grid& g, double A, double tail_exp = 0.0) {
  const int N = g.size(), q = g.q, P = g.num_panels();
  Mat M = Mat::Zero(N, N);
  Mat mom(P, q);
  for(int p = 0; p < P; ++p) {
    std::vector<double> m(q, 0.0);
    detail::moments(g, p, -1.0, 1.0, A, g.panels[p].tb, m.data());
    for(int j = 0; j < q; ++j) mom(p, j) = m[j];
  }
  double rc = g.r_center, r1 = g.r[0];
  if(!(A + tail_exp + 1 > 0)) throw InputError("down_kernel: tail not integrable");
  std::vector<double> m(q);
  for(int i = 0; i < N; ++i) {
    int pi = g.panel_of[i];
    std::fill(m.begin(), m.end(), 0.0);
    detail::moments(g, pi, -1.0, g.xloc[i], A, g.lnr[i], m.data());
    for(int j = 0; j < q; ++j) M(i, pi * q + j) = m[j];
    for(int p = pi - 1; p >= 0; --p) {
      double le = A * (g.panels[p].tb - g.lnr[i]);
      if(le < -700) break;
      double f = std::exp(le);
      for(int j = 0; j < q; ++j) M(i, p * q + j) = f * mom(p, j);
    }
    double lt = A * (std::log(rc) - g.lnr[i]) + tail_exp * (std::log(rc) - std::log(r1));
    if(lt > -700) M(i, 0) += rc * std::exp(lt) / (A + tail_exp + 1);
  }
  return M;
}

// Row vector w with w·F = ∫_0^R (ρ/R)^A F(ρ) dρ.
inline RowVec full_kernel(const Grid& g, double A, double tail_exp = 0.0) {
  const int q = g.q, P = g.num_panels();
  RowVec w = RowVec::Zero(g.size());
  double lR = std::log(g.R);
  for(int p = 0; p < P; ++p) {
    std::vector<double> m(q, 0.0);
    detail::moments(g, p, -1.0, 1.0, A, g.panels[p].tb, m.data());
    double f = std::exp(A * (g.panels[p].tb - lR));
    for(int j = 0; j < q; ++j) w[p * q + j] = f * m[j];
  }
  double rc = g.r_center, r1 = g.r[0];
  if(!(A + tail_exp + 1 > 0)) throw InputError("full_kernel: tail not integrable");
  double lt = A * (std::log(rc) - lR) + tail_exp * (std::log(rc) - std::log(r1));
  if(lt > -700) w[0] += rc * std::exp(lt) / (A + tail_exp + 1);
  return w;
}

}  // namespace fbspec

#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "radial.hpp"
#include "rate_model.hpp"

namespace fbspec {

namespace odeint = boost::numeric::odeint;

struct StationaryOptions {
  int grid_nodes = 512;
  int grid_order = 15;
  double start_offset = 1e-6;   // h0 / R at the outer endpoint
  double center_decay = 1e-9;   // (r0/R)^alpha0 at the inner start
  double gamma_ref = 1.0;
  int max_newton = 40;
};

struct StationaryProfile {
  RateModel model;
  int n = 3;
  double tol = 0;
  StationaryOptions options;
  GridPtr grid;

  double R = 0, sigma0 = 0, p0 = 0, alpha0 = 0, alpha1 = 0;
  double g11 = 0, dsigma_R = 0, dp_R = 0, C_left = 0;
  double c0 = 0, sigma_exp = 0, gamma_ref = 1;
  double residual_max = 0;

  // Stored on the grid. dp has scale 1, i.e. it holds (r/R)·p′.
  RadialFn sigma, dsigma, p, dp, v, dv, pi;
  RadialFn f, g, f_s, f_p, g_s, g_p;
  // v/r, σ′/r, and log of the regular part W·(r/R)^alpha0 with W(R/2) = 1.
  Vec w, zs, log_what;
  double log_what_zero = 0;  // limit of log_what at r = 0
};

namespace detail {

using S5 = std::array<double, 5>;

struct Integrator {
  double abs_tol, rel_tol;

  // max_dt bounds the trial step; a trial that lands on a NaN state would
  // otherwise pass the error test.
  template <class Sys>
  void run(Sys&& sys, S5& x, double t0, double t1, double max_dt) const {
    if(t1 == t0) return;
    auto st = odeint::make_controlled(abs_tol, rel_tol, max_dt, odeint::runge_kutta_fehlberg78<S5>());
    double dt = std::min((t1 - t0) / 64, max_dt);
    odeint::integrate_adaptive(st, sys, x, t0, t1, dt);
  }

  template <class Sys, class Obs>
  void run_times(Sys&& sys, S5& x, const std::vector<double>& times, double max_dt, Obs obs) const {
    auto st = odeint::make_controlled(abs_tol, rel_tol, max_dt, odeint::runge_kutta_fehlberg78<S5>());
    double dt = std::min((times.back() - times.front()) / 1024, max_dt);
    odeint::integrate_times(st, sys, x, times.begin(), times.end(), dt, obs);
  }
};

// Single-trial shooting pieces for a given center concentration.
struct Shooter {
  const RateModel& m;
  int n;
  Integrator ig;

  double s0 = 0, p0 = 0, g0 = 0, alpha0 = 0;
  double R = 0, sR = 0;
  double g11 = 0, alpha1 = 0, dpR = 0, d2sR = 0, d2pR = 0, d2vR = 0;

  Shooter(const RateModel& model, int dim, double tol) : m(model), n(dim), ig{tol, tol} {}

  bool set_center(double sigma0) {
    s0 = sigma0;
    p0 = m.center_density(s0);
    g0 = m.g(s0, p0);
    if(!(g0 < 0)) return false;
    alpha0 = n * m.partials(s0, p0).f_p / g0;
    return true;
  }

  // σ equation alone in t = ln r on (δσ, σ′/r): forward from the center to σ = 1.
  bool sigma_shot() {
    double Fp = std::max(m.dF(s0), 1e-300);
    double r_s = 1e-6 / std::sqrt(std::max(Fp, 1.0));
    auto sys = [&](const S5& x, S5& d, double t) {
      double r2 = std::exp(2 * t);
      d[0] = r2 * x[1];
      d[1] = m.F(s0 + x[0]) - n * x[1];
      d[2] = d[3] = d[4] = 0;
    };
    double F0 = m.F(s0);
    S5 x{F0 * r_s * r_s / (2 * n), F0 / n, 0, 0, 0};
    double t = std::log(r_s), dt = 0.05, t_max = std::log(1e8);
    auto st = odeint::make_controlled(ig.abs_tol, ig.rel_tol, 0.5, odeint::runge_kutta_fehlberg78<S5>());
    while(t < t_max) {
      S5 prev = x;
      double tp = t;
      if(st.try_step(sys, x, t, dt) == odeint::fail) continue;
      if(s0 + x[0] >= 1.0) {
        auto h = [&](double tt) {
          S5 y = prev;
          ig.run(sys, y, tp, tt, 0.5);
          return s0 + y[0] - 1.0;
        };
        boost::uintmax_t iters = 200;
        auto bracket = boost::math::tools::toms748_solve(
            h, tp, t, s0 + prev[0] - 1.0, s0 + x[0] - 1.0,
            boost::math::tools::eps_tolerance<double>(52), iters);
        double tr = 0.5 * (bracket.first + bracket.second);
        S5 y = prev;
        ig.run(sys, y, tp, tr, 0.5);
        R = std::exp(tr);
        sR = y[1] * R;
        end_coefficients();
        return true;
      }
      dt = std::min(dt, 0.5);
    }
    return false;
  }

  // Local data at r = R of the regular branch.
  void end_coefficients() {
    Partials a = m.partials(1.0, 1.0);
    SecondPartials b = m.second_partials(1.0, 1.0);
    g11 = m.g(1.0, 1.0);
    alpha1 = -a.f_p / g11;
    dpR = a.f_s * sR / (g11 - a.f_p);
    d2sR = m.F(1.0) - (n - 1) * sR / R;
    d2vR = a.g_s * sR + a.g_p * dpR - (n - 1) * g11 / R;
    d2pR = (b.f_ss * sR * sR + 2 * b.f_sp * sR * dpR + b.f_pp * dpR * dpR + a.f_s * d2sR - d2vR * dpR) /
           (2 * g11 - a.f_p);
  }

  // Outer state in s = R − r: (σ−1, σ′, p−1, r^{n−1}v, regularized log W).
  S5 right_series(double s) const {
    double r = R - s;
    double v = -g11 * s + 0.5 * d2vR * s * s;
    return {-sR * s + 0.5 * d2sR * s * s, sR - d2sR * s, -dpR * s + 0.5 * d2pR * s * s,
            std::pow(r, n - 1) * v, 0.0};
  }

  auto right_system() const {
    return [this](const S5& x, S5& d, double s) {
      if(!(std::abs(x[2]) < 4 && x[3] < 0)) {
        d = {0, 0, 0, 0, 0};
        return;
      }
      double r = R - s, rn1 = std::pow(r, n - 1);
      double sig = 1 + x[0], pp = 1 + x[2];
      double f = m.f_increment(1.0, 1.0, x[0], x[2]);
      d[0] = -x[1];
      d[1] = -(m.F(sig) - (n - 1) * x[1] / r);
      d[2] = -f * rn1 / x[3];
      d[3] = -rn1 * m.g(sig, pp);
      d[4] = m.partials(sig, pp).f_p * rn1 / x[3] - alpha1 / s;
    };
  }

  // Inner state in t = ln r: (σ−σ̄₀, σ′/r, p−p̄₀, v/r, regularized log W).
  S5 left_series(double r, double C) const {
    double e = C * std::pow(r / R, alpha0), F0 = m.F(s0);
    Partials a = m.partials(s0, p0);
    return {F0 * r * r / (2 * n), F0 / n, e,
            g0 / n + a.g_p * e / (n + alpha0) + a.g_s * F0 * r * r / (2 * n * (n + 2)), 0.0};
  }

  auto left_system() const {
    return [this](const S5& x, S5& d, double t) {
      // Freeze a trajectory whose density has left any sensible range so a
      // blown-up trial ends with a finite, recognisable state.
      if(!(std::abs(x[2]) < 4 && x[3] < 0)) {
        d = {0, 0, 0, 0, 0};
        return;
      }
      double r2 = std::exp(2 * t);
      double sig = s0 + x[0], pp = p0 + x[2];
      d[0] = r2 * x[1];
      d[1] = m.F(sig) - n * x[1];
      d[2] = m.f_increment(s0, p0, x[0], x[2]) / x[3];
      d[3] = m.g(sig, pp) - n * x[3];
      d[4] = -m.partials(sig, pp).f_p / x[3] + alpha0;
    };
  }

  double r_start(double decay) const {
    double le = std::log(decay) / alpha0;
    return R * std::exp(std::max(le, std::log(1e-150)));
  }

  // Backward classification for the bisection seed: +1 when v vanishes or
  // the integration stalls before the center, −1 otherwise.
  int classify(double h0, double* p_end = nullptr, double* r_end_out = nullptr) const {
    S5 x = right_series(h0 * R);
    double s = h0 * R, s_end = R * (1 - 1e-6), ds = 1e-3 * R;
    auto sys = right_system();
    auto st = odeint::make_controlled(ig.abs_tol, ig.rel_tol, odeint::runge_kutta_fehlberg78<S5>());
    while(s < s_end) {
      if(s + ds > s_end) ds = s_end - s;
      S5 prev = x;
      if(st.try_step(sys, x, s, ds) == odeint::fail) {
        x = prev;
        if(ds < 1e-13 * R) return +1;
        continue;
      }
      bool bad = false;
      for(double c : x) bad |= !std::isfinite(c);
      if(bad || x[3] >= 0 || std::abs(x[2]) > 2) return +1;
    }
    if(p_end) *p_end = 1 + x[2];
    if(r_end_out) *r_end_out = R - s;
    return -1;
  }
};

inline double log_ratio(double r, double R) { return std::log(r / R); }

}  // namespace detail

class StationarySolver {
public:
  StationarySolver(const RateModel& m, int n, double tol, StationaryOptions opt = {})
      : m_(m), n_(n), tol_(tol), opt_(opt) {
    if(n < 2) throw InputError("stationary: n must be >= 2");
    if(!(tol > 0)) throw InputError("stationary: tol must be positive");
  }

  StationaryProfile solve() {
    seed();
    newton();
    GridPtr g = std::make_shared<Grid>(Grid::build(
        sh().R, sh().r_start(opt_.center_decay * opt_.start_offset / 1e-6),
        GridSpec::from_nodes(opt_.grid_nodes, opt_.grid_order)));
    return profile_on(g);
  }

  // Rebuilds the solver state from converged shooting parameters.
  static StationarySolver from_parameters(const RateModel& m, int n, double tol, StationaryOptions opt,
                                          double sigma0, double C_left) {
    StationarySolver s(m, n, tol, opt);
    s.sigma0_ = sigma0;
    s.C_ = C_left;
    s.shooter_ = std::make_unique<detail::Shooter>(s.make_shooter(sigma0));
    return s;
  }

  // Profile of the converged solution sampled on another grid.
  StationaryProfile profile_on(GridPtr g) const;

  double sigma0() const { return sigma0_; }
  double C_left() const { return C_; }
  double R() const { return shooter_->R; }
  const std::vector<double>& newton_history() const { return hist_; }

private:
  detail::Shooter& sh() const { return *shooter_; }

  detail::Shooter make_shooter(double sigma0) const {
    detail::Shooter s(m_, n_, tol_ / 10);
    if(!s.set_center(sigma0)) throw NumericalError("stationary: trial center has g >= 0");
    if(!s.sigma_shot()) throw NumericalError("stationary: sigma never reaches 1");
    return s;
  }

  int trial_class(double sigma0, double* p_end = nullptr, double* r_end = nullptr) const {
    detail::Shooter s(m_, n_, tol_ / 10);
    if(!s.set_center(sigma0)) return 0;
    if(!s.sigma_shot()) return 0;
    return s.classify(opt_.start_offset, p_end, r_end);
  }

  void seed() {
    // Coarse sweep in log σ̄₀; the root separates stalled (+) from regular (−) shots.
    std::vector<double> xs;
    for(double e = -14; e < -0.0005; e += 0.25) xs.push_back(e * std::log(10.0));
    xs.push_back(std::log(1 - 1e-9));
    int prev_cls = 0;
    double lo = 0, hi = 0;
    bool found = false;
    for(size_t i = 0; i < xs.size(); ++i) {
      int c = trial_class(std::exp(xs[i]));
      if(c == -1 && prev_cls == +1) {
        lo = xs[i - 1];
        hi = xs[i];
        found = true;
        break;
      }
      if(c != 0) prev_cls = c;
    }
    if(!found) throw NumericalError("stationary: no sign change of the shooting functional on (0,1)");
    for(int it = 0; it < 60 && hi - lo > 1e-14; ++it) {
      double mid = 0.5 * (lo + hi);
      int c = trial_class(std::exp(mid));
      if(c == 0) throw NumericalError("stationary: rejected trial inside bracket");
      (c > 0 ? lo : hi) = mid;
    }
    sigma0_ = std::exp(hi);
    shooter_ = std::make_unique<detail::Shooter>(make_shooter(sigma0_));
    C_ = std::exp(seed_log_c(sh()));
  }

  // Matching defect at R/2 for (ln σ̄₀, ln C_left).
  std::array<double, 2> residual(double x, double lc) const {
    detail::Shooter s = make_shooter(std::exp(x));
    double C = std::exp(lc);
    double M = s.R / 2;
    double r0 = s.r_start(opt_.center_decay * opt_.start_offset / 1e-6);
    detail::S5 L = s.left_series(r0, C);
    s.ig.run(s.left_system(), L, std::log(r0), std::log(M), 0.5);
    double h0 = opt_.start_offset * s.R;
    detail::S5 Rt = s.right_series(h0);
    s.ig.run(s.right_system(), Rt, h0, s.R - M, s.R / 64);
    double pL = s.p0 + L[2], pR = 1 + Rt[2];
    double vL = L[3] * M, vR = Rt[3] / std::pow(M, n_ - 1);
    double vs = std::abs(s.g0) * M / n_;
    if(!(std::abs(L[2]) < 4 && L[3] < 0) || !(std::abs(Rt[2]) < 4 && Rt[3] < 0)) {
      throw NumericalError("stationary: trial trajectory left the admissible range");
    }
    return {pL - pR, (vL - vR) / vs};
  }

  // Inner density at R/2 minus the outer one, +inf for a blown-up inner shot.
  double density_gap(const detail::Shooter& s, double lc) const {
    double M = s.R / 2;
    double r0 = s.r_start(opt_.center_decay * opt_.start_offset / 1e-6);
    detail::S5 L = s.left_series(r0, std::exp(lc));
    s.ig.run(s.left_system(), L, std::log(r0), std::log(M), 0.5);
    if(!(std::abs(L[2]) < 4 && L[3] < 0)) return std::numeric_limits<double>::infinity();
    return s.p0 + L[2] - p_outer_;
  }

  // ln C_left for the seeded center: the inner trajectory is monotone in C,
  // so bisect the density gap at R/2.
  double seed_log_c(const detail::Shooter& s) {
    double h0 = opt_.start_offset * s.R;
    detail::S5 Rt = s.right_series(h0);
    s.ig.run(s.right_system(), Rt, h0, s.R - s.R / 2, s.R / 64);
    p_outer_ = 1 + Rt[2];
    double lo = std::log(1e-14), hi = std::log(10.0);
    if(!(density_gap(s, lo) < 0) || !(density_gap(s, hi) > 0)) {
      throw NumericalError("stationary: no bracket for the inner amplitude");
    }
    for(int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
      double mid = 0.5 * (lo + hi);
      (density_gap(s, mid) < 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  void newton() {
    double x = std::log(sigma0_), C = std::log(C_);
    auto F = residual(x, C);
    auto nrm = [](const std::array<double, 2>& a) { return std::hypot(a[0], a[1]); };
    hist_ = {nrm(F)};
    for(int it = 0; it < opt_.max_newton && nrm(F) > tol_ * 1e-2; ++it) {
      double hx = 1e-7, hC = 1e-7;
      auto Fx = residual(x + hx, C), FC = residual(x, C + hC);
      double J00 = (Fx[0] - F[0]) / hx, J10 = (Fx[1] - F[1]) / hx;
      double J01 = (FC[0] - F[0]) / hC, J11 = (FC[1] - F[1]) / hC;
      double det = J00 * J11 - J01 * J10;
      if(!(std::abs(det) > 0)) throw NumericalError("stationary: singular Newton Jacobian");
      double dx = -(J11 * F[0] - J01 * F[1]) / det;
      double dC = -(-J10 * F[0] + J00 * F[1]) / det;
      double lam = 1.0;
      bool accepted = false;
      for(int k = 0; k < 30; ++k, lam *= 0.5) {
        try {
          auto Fn = residual(x + lam * dx, C + lam * dC);
          if(nrm(Fn) < nrm(F) || k == 29) {
            x += lam * dx;
            C += lam * dC;
            F = Fn;
            accepted = true;
            break;
          }
        } catch(const NumericalError&) {
        }
      }
      if(!accepted) break;
      hist_.push_back(nrm(F));
      if(std::abs(lam * dx) < 1e-15 && std::abs(lam * dC) < 1e-15) break;
    }
    if(!(nrm(F) <= std::max(tol_, 1e-12))) {
      throw NumericalError("stationary: shooting did not converge, matching residual " +
                           std::to_string(nrm(F)));
    }
    sigma0_ = std::exp(x);
    C_ = std::exp(C);
    shooter_ = std::make_unique<detail::Shooter>(make_shooter(sigma0_));
  }

  RateModel m_;
  int n_;
  double tol_;
  StationaryOptions opt_;
  double sigma0_ = 0, C_ = 0, p_outer_ = 0;
  std::unique_ptr<detail::Shooter> shooter_;
  std::vector<double> hist_;
};

inline StationaryProfile StationarySolver::profile_on(GridPtr gp) const {
  const Grid& G = *gp;
  const detail::Shooter& s = *shooter_;
  const int N = G.size(), n = n_;
  const double R = s.R, M = R / 2;
  StationaryProfile P;
  P.model = m_;
  P.n = n;
  P.tol = tol_;
  P.options = opt_;
  P.grid = gp;
  P.R = R;
  P.sigma0 = s.s0;
  P.p0 = s.p0;
  P.alpha0 = s.alpha0;
  P.alpha1 = s.alpha1;
  P.g11 = s.g11;
  P.dsigma_R = s.sR;
  P.dp_R = s.dpR;
  P.C_left = C_;
  P.gamma_ref = opt_.gamma_ref;

  Vec sig(N), zs(N), pp(N), P1(N), v(N), w(N), lw(N);
  // Inner side.
  std::vector<double> times;
  std::vector<int> idx;
  double r0 = s.r_start(opt_.center_decay * opt_.start_offset / 1e-6);
  times.push_back(std::log(r0));
  for(int i = 0; i < N && G.r[i] <= M; ++i) {
    times.push_back(G.lnr[i]);
    idx.push_back(i);
  }
  times.push_back(std::log(M));
  detail::S5 L = s.left_series(r0, C_);
  std::vector<detail::S5> left_states;
  s.ig.run_times(s.left_system(), L, times, 0.5, [&](const detail::S5& x, double) { left_states.push_back(x); });
  double LM = left_states.back()[4];
  double shiftL = s.alpha0 * std::log(M / R) - LM;
  for(size_t k = 0; k < idx.size(); ++k) {
    const detail::S5& x = left_states[k + 1];
    int i = idx[k];
    double r = G.r[i];
    sig[i] = s.s0 + x[0];
    zs[i] = x[1];
    pp[i] = s.p0 + x[2];
    w[i] = x[3];
    v[i] = x[3] * r;
    P1[i] = m_.f_increment(s.s0, s.p0, x[0], x[2]) / (x[3] * R);
    lw[i] = x[4] + shiftL;
  }
  // Outer side, ordered by increasing s. The profile pass starts below the
  // outermost node so every node is integrated rather than series-filled.
  double h0 = std::min(opt_.start_offset * R, 0.5 * G.s[N - 1]);
  std::vector<double> st{h0};
  std::vector<int> jdx;
  for(int i = N - 1; i >= 0 && G.r[i] > M; --i) {
    if(G.s[i] <= h0) continue;
    st.push_back(G.s[i]);
    jdx.push_back(i);
  }
  st.push_back(R - M);
  detail::S5 X = s.right_series(h0);
  std::vector<detail::S5> right_states;
  // Relative control: Δσ, Δp and V all vanish linearly at R, and an absolute
  // floor there would swamp the ratio f/v.
  detail::Integrator ig_rel{1e-300, s.ig.rel_tol};
  ig_rel.run_times(s.right_system(), X, st, R / 64, [&](const detail::S5& x, double) { right_states.push_back(x); });
  double QM = right_states.back()[4];
  double shiftR = -(QM + s.alpha1 * std::log((R - M) / R));
  auto set_outer = [&](int i, const detail::S5& x) {
    double r = G.r[i], sv = G.s[i];
    sig[i] = 1 + x[0];
    zs[i] = x[1] / r;
    pp[i] = 1 + x[2];
    v[i] = x[3] / std::pow(r, n - 1);
    w[i] = v[i] / r;
    P1[i] = (r / R) * m_.f_increment(1.0, 1.0, x[0], x[2]) / v[i];
    lw[i] = x[4] + shiftR + s.alpha1 * std::log(sv / R) + s.alpha0 * std::log(r / R);
  };
  for(size_t k = 0; k < jdx.size(); ++k) set_outer(jdx[k], right_states[k + 1]);
  // Nodes inside the series offset.
  {
    auto sys = s.right_system();
    detail::S5 x0 = s.right_series(h0), d;
    sys(x0, d, h0);
    for(int i = N - 1; i >= 0 && G.s[i] <= h0; --i) {
      detail::S5 x = s.right_series(G.s[i]);
      x[4] = d[4] * (G.s[i] - h0);
      set_outer(i, x);
      // f/v from the series directly, both vanish linearly.
      P1[i] = (G.r[i] / R) * (s.dpR - s.d2pR * G.s[i]);
    }
  }

  auto fn = [&](const Vec& x, double scale = 0) { return RadialFn(gp, x, scale); };
  P.sigma = fn(sig);
  P.sigma.a1 = 1;
  Vec dsg(N);
  for(int i = 0; i < N; ++i) dsg[i] = zs[i] * G.r[i];
  P.dsigma = fn(dsg);
  P.dsigma.a0 = 1;
  P.p = fn(pp);
  P.dp = fn(P1, 1.0);
  P.dp.a0 = s.alpha0 - 1;
  P.v = fn(v);
  P.v.a0 = 1;
  P.v.a1 = 1;
  Vec fv(N), gv(N), fs(N), fpv(N), gs(N), gpv(N), dv(N);
  for(int i = 0; i < N; ++i) {
    Partials a = m_.partials(sig[i], pp[i]);
    gv[i] = m_.g(sig[i], pp[i]);
    fs[i] = a.f_s;
    fpv[i] = a.f_p;
    gs[i] = a.g_s;
    gpv[i] = a.g_p;
    fv[i] = P1[i] * R * w[i];  // f = v p′ = (v/r)·r p′
    dv[i] = gv[i] - (n - 1) * w[i];
  }
  P.f = fn(fv);
  P.g = fn(gv);
  P.f_s = fn(fs);
  P.f_p = fn(fpv);
  P.g_s = fn(gs);
  P.g_p = fn(gpv);
  P.dv = fn(dv);
  P.w = w;
  P.zs = zs;
  P.log_what = lw;
  P.log_what_zero = G.left_limit(lw);

  // ϖ = γ_ref/R + ∫_r^R v.
  Mat U0 = up_kernel(G, 0.0);
  Vec piv = Vec::Constant(N, opt_.gamma_ref / R) + U0 * v;
  P.pi = fn(piv);

  // Residuals in forms that stay bounded at r = 0:
  // nZ + rZ′ = F with Z = σ′/r, (v/r)·r p′ = f, n w + r w′ = g.
  Vec rz = G.r_derivative(zs), rw = G.r_derivative(w), rp = G.r_derivative(pp);
  double Fmax = 0, fmax = 0, gmax = 0, r1 = 0, r2 = 0, r3 = 0;
  for(int i = 0; i < N; ++i) {
    Fmax = std::max(Fmax, std::abs(m_.F(sig[i])));
    fmax = std::max(fmax, std::abs(fv[i]));
    gmax = std::max(gmax, std::abs(gv[i]));
  }
  for(int i = 0; i < N; ++i) {
    r1 = std::max(r1, std::abs(n * zs[i] + rz[i] - m_.F(sig[i])) / Fmax);
    r2 = std::max(r2, std::abs(w[i] * rp[i] - fv[i]) / fmax);
    r3 = std::max(r3, std::abs(n * w[i] + rw[i] - gv[i]) / gmax);
  }
  P.residual_max = std::max({r1, r2, r3});

  // p′ ≈ c0 r^σ over a decade near the center.
  {
    const int K = 21;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for(int k = 0; k < K; ++k) {
      double rr = R * std::pow(10.0, -3.0 + double(k) / (K - 1));
      double lx = std::log(rr), ly = std::log(P.dp(rr));
      sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    P.sigma_exp = (K * sxy - sx * sy) / (K * sxx - sx * sx);
    P.c0 = std::exp((sy - P.sigma_exp * sx) / K);
  }
  return P;
}

inline StationaryProfile solve_stationary(const RateModel& m, int n, double tol,
                                          StationaryOptions opt = {}) {
  StationarySolver s(m, n, tol, opt);
  return s.solve();
}

// The same stationary solution sampled on another grid.
inline StationaryProfile resample(const StationaryProfile& P, GridPtr g) {
  return StationarySolver::from_parameters(P.model, P.n, P.tol, P.options, P.sigma0, P.C_left).profile_on(g);
}

inline StationaryProfile refined(const StationaryProfile& P) {
  return resample(P, std::make_shared<Grid>(P.grid->refined()));
}

struct ProfileReport {
  bool ok = true;
  std::vector<std::string> failures;
  double c1 = 0, c2 = 0;  // max / min of −v/(r(R−r))
  double sigma_R_err = 0, p_R_err = 0, v0 = 0, vR = 0;
  double dv_R_rel = 0;     // |v′(R) − g(1,1)| / g(1,1)
  double dp_R_rel = 0;     // p′(R) against the differentiated p equation at v = 0
  double center_sigma = 0; // |σ′/r − F(σ̄₀)/n| / (F(σ̄₀)/n) at the innermost node
  double center_v = 0;     // (v − g r/n)/r at the innermost node
};

inline ProfileReport check_profile_properties(const StationaryProfile& P) {
  ProfileReport rep;
  const Grid& G = *P.grid;
  const RateModel& m = P.model;
  const int N = G.size();
  auto fail = [&](const std::string& s) { rep.ok = false; rep.failures.push_back(s); };
  rep.c1 = 0;
  rep.c2 = std::numeric_limits<double>::infinity();
  for(int i = 0; i < N; ++i) {
    double sg = P.sigma.F[i], pp = P.p.F[i];
    if(!(sg > 0 && sg < 1)) fail("sigma outside (0,1) at node " + std::to_string(i));
    if(!(pp > 0 && pp < 1)) fail("p outside (0,1) at node " + std::to_string(i));
    if(!(P.zs[i] > 0)) fail("sigma' not positive at node " + std::to_string(i));
    if(!(P.dp.F[i] > 0)) fail("p' not positive at node " + std::to_string(i));
    // −v/(r(R−r)) with v = w r.
    double c = -P.w[i] / G.s[i];
    rep.c1 = std::max(rep.c1, c);
    rep.c2 = std::min(rep.c2, c);
    Partials a = m.partials(sg, pp);
    if(!(a.f_p < 0 && a.f_s > 0 && a.g_p > 0 && a.g_s > 0)) {
      fail("rate-sign condition violated at node " + std::to_string(i));
    }
  }
  if(!(rep.c2 > 0 && std::isfinite(rep.c1))) fail("v/(r(R-r)) not bounded away from 0 and infinity");
  rep.sigma_R_err = std::abs(P.sigma.at_R() - 1);
  rep.p_R_err = std::abs(P.p.at_R() - 1);
  rep.v0 = std::abs(G.left_limit(P.w) * G.r_center);
  rep.vR = std::abs(P.v.at_R());
  double dvR = P.dv.at_R();
  rep.dv_R_rel = std::abs(dvR - P.g11) / P.g11;
  Partials aR = m.partials(1.0, 1.0);
  double dpR_formula = aR.f_s * P.dsigma_R / (dvR - aR.f_p);
  rep.dp_R_rel = std::abs(P.dp.at_R() - dpR_formula) / std::abs(dpR_formula);
  {
    // σ − σ̄₀ is below rounding at the innermost node; σ′/r carries the series.
    double c = m.F(P.sigma0) / P.n;
    rep.center_sigma = std::abs(P.zs[0] - c) / std::abs(c);
    rep.center_v = std::abs(P.w[0] - m.g(P.sigma0, P.p0) / P.n);
  }
  if(!(P.alpha0 > 0 && P.alpha1 > 0)) fail("endpoint exponents not positive");
  if(!(P.sigma_exp > -1 && P.sigma_exp <= 1)) fail("sigma_exp outside (-1,1]");
  return rep;
}

}  // namespace fbspec

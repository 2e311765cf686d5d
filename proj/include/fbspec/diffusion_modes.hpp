#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stationary.hpp"

namespace fbspec {

struct ModeDiffusion {
  int k = 0;
  RadialFn u, du;
  double residual_max = 0;
};

// Regular solution of u″ + ((n+2k−1)/r)u′ = F′(σ_s)u normalized by u(R) = 1.
// Integrated forward in t = ln r on (σ−σ̄₀, σ′/r, u, r u′) together with σ,
// from the series u ≈ 1 + F′(σ̄₀) r²/(2(n+2k)) near the center.
inline ModeDiffusion solve_uk(const StationaryProfile& P, const RateModel& m, int k, double tol = 1e-12) {
  if(k < 0) throw InputError("solve_uk: k must be >= 0");
  const Grid& G = *P.grid;
  const int N = G.size(), n = P.n;
  const double R = P.R, a = n + 2 * k;
  using detail::S5;
  auto sys = [&](const S5& x, S5& d, double t) {
    double r2 = std::exp(2 * t), sg = P.sigma0 + x[0];
    d[0] = r2 * x[1];
    d[1] = m.F(sg) - n * x[1];
    d[2] = x[3];
    d[3] = r2 * m.dF(sg) * x[2] - (a - 2) * x[3];
    d[4] = 0;
  };
  auto series = [&](double r) {
    double F0 = P.model.F(P.sigma0), c = m.dF(P.sigma0);
    return S5{F0 * r * r / (2 * n), F0 / n, 1 + c * r * r / (2 * a), c * r * r / a, 0};
  };
  double r_s = 1e-8 * R;
  std::vector<double> times{std::log(r_s)};
  std::vector<int> idx;
  for(int i = 0; i < N; ++i) {
    if(G.r[i] > r_s) {
      times.push_back(G.lnr[i]);
      idx.push_back(i);
    }
  }
  times.push_back(std::log(R));
  S5 x = series(r_s);
  std::vector<S5> states;
  // Relative control only: r u′ spans hundreds of decades toward the center.
  detail::Integrator ig{1e-250, tol};
  ig.run_times(sys, x, times, 0.25, [&](const S5& y, double) { states.push_back(y); });
  const S5& end = states.back();
  double uR = end[2];
  if(!(uR > 0 && std::isfinite(uR))) throw NumericalError("solve_uk: non-finite boundary value");
  Vec u(N), du(N);
  for(int i = 0; i < N && G.r[i] <= r_s; ++i) {
    S5 y = series(G.r[i]);
    u[i] = y[2] / uR;
    du[i] = y[3] / (G.r[i] * uR);
  }
  for(size_t j = 0; j < idx.size(); ++j) {
    int i = idx[j];
    u[i] = states[j + 1][2] / uR;
    du[i] = states[j + 1][3] / (G.r[i] * uR);
  }
  ModeDiffusion md;
  md.k = k;
  md.u = RadialFn(P.grid, u, 0.0);
  md.u.a0 = 0;
  md.du = RadialFn(P.grid, du, 0.0);
  md.du.a0 = 1;
  // Residual of the ODE in the form (r u′)′ r + (a−2)(r u′) = r² F′ u.
  Vec z(N);
  for(int i = 0; i < N; ++i) z[i] = G.r[i] * du[i];
  Vec rz = G.r_derivative(z);
  double scale = 0;
  for(int i = 0; i < N; ++i) scale = std::max(scale, std::abs(G.r[i] * G.r[i] * m.dF(P.sigma.F[i]) * u[i]));
  scale = std::max(scale, 1e-300);
  for(int i = 0; i < N; ++i) {
    double e = rz[i] + (a - 2) * z[i] - G.r[i] * G.r[i] * m.dF(P.sigma.F[i]) * u[i];
    md.residual_max = std::max(md.residual_max, std::abs(e) / scale);
  }
  return md;
}

// Translation-mode identity u₁ = R σ′(r)/(r σ′(R)); returns the relative sup error.
inline double u1_oracle_error(const StationaryProfile& P, const ModeDiffusion& u1) {
  double num = 0, den = 0;
  for(int i = 0; i < P.grid->size(); ++i) {
    double ref = P.R * P.zs[i] / P.dsigma_R;
    num = std::max(num, std::abs(u1.u.F[i] - ref));
    den = std::max(den, std::abs(ref));
  }
  return num / den;
}

struct DiffusionReport {
  bool ok = true;
  std::vector<std::string> failures;
  double C = 0;       // measured constant of the two linear bounds
  double u_min = 0;   // min u_k(r) over all k and nodes
};

// Positivity, the two bounds with a single measured constant, and
// monotonicity in k, for a list of modes in increasing k.
inline DiffusionReport check_diffusion_modes(const StationaryProfile& P, const std::vector<ModeDiffusion>& modes) {
  DiffusionReport rep;
  const Grid& G = *P.grid;
  const int N = G.size();
  auto fail = [&](const std::string& s) { rep.ok = false; rep.failures.push_back(s); };
  rep.u_min = std::numeric_limits<double>::infinity();
  // A few ulps of slack separate rounding from genuine violations.
  const double slack = 64 * std::numeric_limits<double>::epsilon();
  for(size_t j = 0; j < modes.size(); ++j) {
    const ModeDiffusion& md = modes[j];
    double a = P.n + 2 * md.k;
    for(int i = 0; i < N; ++i) {
      double u = md.u.F[i], du = md.du.F[i];
      rep.u_min = std::min(rep.u_min, u);
      if(!(u > 0) || u > 1 + slack) fail("u_k outside (0,1] for k=" + std::to_string(md.k));
      if(du < -slack * std::abs(du) - 1e-300) fail("u_k' negative for k=" + std::to_string(md.k));
      rep.C = std::max(rep.C, (1 - u) * a / G.s[i]);
      rep.C = std::max(rep.C, du * a / G.r[i]);
      if(j > 0 && modes[j - 1].k < md.k && u < modes[j - 1].u.F[i] * (1 - slack)) {
        fail("u_k not monotone in k at k=" + std::to_string(md.k));
      }
    }
  }
  if(!std::isfinite(rep.C)) fail("bound constant not finite");
  return rep;
}

}  // namespace fbspec

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "diffusion_modes.hpp"
#include "harmonics.hpp"
#include "singular_solver.hpp"

namespace fbspec {

// Mode coefficients at scale β. b and b̃ carry the growth of p′ at the
// center, so k = 1 needs β = 1; every other k uses β = 0.
struct ModeCoefficients {
  int k = 0;
  double gamma = 0;
  double alpha = 0;       // α_k(γ)
  double flux = 0;        // ∫_0^R (ρ/R)^{n+2k−1} g_σ u_k
  RadialFn b, btilde;
};

inline double gamma_factor(int n, int k) {
  return (1.0 - lambda_k(n, k) / (n - 1)) * k;
}

inline ModeCoefficients compute_mode_coeffs(const StationaryProfile& P, const ModeDiffusion& md, double gamma,
                                            double beta) {
  const Grid& G = *P.grid;
  const int n = P.n, k = md.k, N = G.size();
  const double th = theta_k(n, k), sR = P.dsigma_R, R = P.R;
  Vec Gs = (P.g_s.F.array() * md.u.F.array()).matrix();
  Vec U = up_kernel(G, -1.0) * Gs;
  Vec D = down_kernel(G, n + 2 * k - 1) * Gs;
  double Fn = full_kernel(G, n + 2 * k - 1) * Gs;
  double cg = gamma_factor(n, k) * gamma / (R * R * R);
  Vec x0 = node_power(G, k + beta - 2), x1 = node_power(G, k + beta - 1), x2 = node_power(G, k + beta);
  ModeCoefficients c;
  c.k = k;
  c.gamma = gamma;
  c.flux = Fn;
  c.alpha = cg + P.g11 - sR * Fn;
  Vec bt(N), b(N);
  for(int i = 0; i < N; ++i) {
    double tail = -sR * x2[i] * P.f_s.F[i] * md.u.F[i];
    double common = -sR * th * x1[i] * U[i] + sR * (1 - th) * x1[i] * D[i];
    double brt = P.g11 * x0[i] - sR * (1 - th) * Fn * x0[i] + common;
    double brb = -cg * x0[i] + sR * th * Fn * x0[i] + common;
    bt[i] = P.dp.F[i] * brt + tail;
    b[i] = P.dp.F[i] * brb + tail;
  }
  c.btilde = RadialFn(P.grid, bt, beta);
  c.b = RadialFn(P.grid, b, beta);
  return c;
}

// ψ_k from the Fredholm route at scale 0, cross-checked by the decomposition
// route, which is only representable at scale n+k.
struct PsiSolution {
  RadialFn psi;             // scale 0
  LkSolution dec;           // decomposition route, scale n+k
  double residual = 0;      // Fredholm integral-equation residual
  double pointwise = 0;     // |L̃ψ + b̃| at the nodes, relative to max|b̃|
  double route_diff = 0;    // sup|x^{n+k}Δ| / sup|x^{n+k}ψ|
  double route_diff_plain = 0;  // relative sup on nodes with x^{n+k−1} ≥ 1e−6
  double boundary_error = 0;    // |ψ(R) + b̃(R)/f_p(R)| relative
};

inline PsiSolution solve_psi_k(const ModeOperators& ops, const Lk0Solver& S, const ModeCoefficients& c) {
  if(ops.k() < 2) throw InputError("solve_psi_k: k must be >= 2");
  const StationaryProfile& P = ops.profile();
  const Grid& G = *P.grid;
  const int N = G.size();
  if(c.btilde.scale != 0) throw InputError("solve_psi_k: b~ must be at scale 0");
  PsiSolution out;
  FredholmSolution fs = solve_fredholm(ops, c.btilde);
  out.psi = fs.psi;
  out.psi.a0 = 0;
  out.residual = fs.residual;
  Vec res = ops.L(out.psi.F, 0.0) + ops.K(0.0) * out.psi.F + c.btilde.F;
  double bmax = std::max(c.btilde.F.lpNorm<Eigen::Infinity>(), 1e-300);
  out.pointwise = res.lpNorm<Eigen::Infinity>() / bmax;
  double ref = -c.btilde.at_R() / P.f_p.at_R();
  out.boundary_error = std::abs(out.psi.at_R() - ref) / std::max(1.0, std::abs(ref));

  RadialFn h(P.grid, -c.btilde.F, 0.0);
  out.dec = solve_Lk(S, ops, h);
  const double beta = S.scale();
  Vec xs = node_power(G, beta), xc = node_power(G, beta - 1);
  double num = 0, den = 0, pn = 0, pd = 0;
  for(int i = 0; i < N; ++i) {
    double a = out.psi.F[i] * xs[i], b = out.dec.phi.F[i];
    num = std::max(num, std::abs(a - b));
    den = std::max(den, std::abs(a));
    if(xc[i] >= 1e-6) {
      double u = b / xs[i];
      pn = std::max(pn, std::abs(u - out.psi.F[i]));
      pd = std::max(pd, std::abs(out.psi.F[i]));
    }
  }
  out.route_diff = num / std::max(den, 1e-300);
  out.route_diff_plain = pn / std::max(pd, 1e-300);
  return out;
}

// γ_k from the closed formula with plain Gauss quadrature of the node values.
inline double gamma_closed_form(const StationaryProfile& P, const ModeDiffusion& md, const RadialFn& psi) {
  const Grid& G = *P.grid;
  const int n = P.n, k = md.k;
  if(k < 2) throw InputError("compute_gamma_k: k must be >= 2");
  if(psi.scale != 0) throw InputError("compute_gamma_k: psi must be at scale 0");
  Vec a = node_power(G, n + 2 * k - 1), b = node_power(G, n + k - 1);
  Vec i1 = (a.array() * P.g_s.F.array() * md.u.F.array()).matrix();
  Vec i2 = (b.array() * P.g_p.F.array() * psi.F.array()).matrix();
  double bracket = P.g11 - P.dsigma_R * G.integrate(i1) + G.integrate(i2);
  return (n - 1) * std::pow(P.R, 3) / ((lambda_k(n, k) - n + 1) * k) * bracket;
}

// γ at which J_k(ψ_k) + α_k(γ) vanishes, with α_k(γ) re-assembled from the
// mode coefficients; α_k is affine in γ, so two evaluations determine the root.
inline double gamma_root(const StationaryProfile& P, const ModeDiffusion& md, double J_psi) {
  double f0 = J_psi + compute_mode_coeffs(P, md, 0.0, 0.0).alpha;
  double f1 = J_psi + compute_mode_coeffs(P, md, 1.0, 0.0).alpha;
  if(f1 == f0) throw NumericalError("gamma_root: alpha_k does not depend on gamma");
  return -f0 / (f1 - f0);
}

struct ModeSpectrumEntry {
  int k = 0;
  double lambda = 0;
  double gamma = 0;         // closed formula
  double gamma_root = 0;    // root of J_k(ψ_k) + α_k(γ)
  double consistency = 0;   // |J_k(ψ_k) + α_k(γ_k)| / g(1,1)
  double J_psi = 0;
  RadialFn psi, v, d;       // scale 0
  RadialFn phik, psi_tilde; // scale n+k
  double residual = 0, pointwise = 0, route_diff = 0, route_diff_plain = 0, boundary_error = 0;
  double nu_tilde = 0;      // J_k(ψ̃_k) / (1 − J_k(φ_k))
  double nu_direct = 0;     // J_k(v_k)
  double J_abs_phik = 0, J_abs_psi_tilde = 0;
  double psi_tilde_R = 0, psi_tilde_R_closed = 0;
  double phik_R = 0, phik_max = 0;  // boundary value and max over nodes
};

inline ModeSpectrumEntry compute_mode_entry(const StationaryProfile& P, const ModeDiffusion& md) {
  const int k = md.k, n = P.n;
  if(k < 2) throw InputError("compute_mode_entry: k must be >= 2");
  const Grid& G = *P.grid;
  const int N = G.size();
  ModeOperators ops(P, k);
  Lk0Solver S(ops);
  ModeCoefficients c = compute_mode_coeffs(P, md, 0.0, 0.0);
  PsiSolution ps = solve_psi_k(ops, S, c);
  ModeSpectrumEntry e;
  e.k = k;
  e.lambda = lambda_k(n, k);
  e.psi = ps.psi;
  e.residual = ps.residual;
  e.pointwise = ps.pointwise;
  e.route_diff = ps.route_diff;
  e.route_diff_plain = ps.route_diff_plain;
  e.boundary_error = ps.boundary_error;
  e.J_psi = apply_Jk(ops, ps.psi);
  e.gamma = gamma_closed_form(P, md, ps.psi);
  e.gamma_root = gamma_root(P, md, e.J_psi);
  e.consistency = std::abs(e.J_psi + compute_mode_coeffs(P, md, e.gamma, 0.0).alpha) / P.g11;

  // g_σ/g_p is well defined because g_p > 0 along the profile.
  const double sR = P.dsigma_R;
  Vec xk = node_power(G, k), xk2 = node_power(G, k - 2);
  Vec h(N), v(N), d(N);
  for(int i = 0; i < N; ++i) {
    if(!(P.g_p.F[i] > 0)) throw NumericalError("compute_mode_entry: g_p must be positive");
    h[i] = P.g_s.F[i] / P.g_p.F[i] * xk[i] * md.u.F[i];
    v[i] = ps.psi.F[i] - sR * h[i];
  }
  Vec rh = G.r_derivative(h);
  for(int i = 0; i < N; ++i) {
    double mix = (P.f_s.F[i] * P.g_p.F[i] - P.f_p.F[i] * P.g_s.F[i]) / P.g_p.F[i];
    d[i] = -P.g11 * xk2[i] * P.dp.F[i] + sR * (P.w[i] * rh[i] + mix * xk[i] * md.u.F[i]);
  }
  e.v = RadialFn(P.grid, v, 0.0);
  e.d = RadialFn(P.grid, d, 0.0);
  e.nu_direct = apply_Jk(ops, e.v);
  Lk0Solution pt = S.solve(e.d);
  e.psi_tilde = pt.phi;
  e.phik = ps.dec.phik;
  Vec aphi = e.phik.F.cwiseAbs(), apsi = e.psi_tilde.F.cwiseAbs();
  e.J_abs_phik = S.J(RadialFn(P.grid, aphi, S.scale()));
  e.J_abs_psi_tilde = S.J(RadialFn(P.grid, apsi, S.scale()));
  e.nu_tilde = S.J(e.psi_tilde) / (1 - S.J(e.phik));
  e.psi_tilde_R = e.psi_tilde.at_R();
  e.psi_tilde_R_closed = -sR * P.g_s.at_R() / P.g_p.at_R() - P.dp.at_R();
  e.phik_R = e.phik.at_R();
  e.phik_max = e.phik.F.maxCoeff();
  return e;
}

// Translation-mode checks at k = 1: ψ₁ = −p′ and J₁(ψ₁) + α₁ = 0.
struct Mode1Report {
  bool ok = true;
  double psi_error = 0;       // sup|r(ψ₁ + p′)| / sup|r p′|
  double psi_error_nodewise = 0;  // max |ψ₁/(−p′) − 1|
  double J_error = 0;         // |J₁(ψ₁) + α₁| / g(1,1)
  double translation_residual = 0;  // max |L̃₁(−p′) + b̃₁| at nodes
  double fredholm_residual = 0;
  double alpha1 = 0;
};

inline Mode1Report verify_mode1(const StationaryProfile& P, const ModeDiffusion& u1, double tol_psi = 1e-5,
                                double tol_J = 1e-6) {
  if(u1.k != 1) throw InputError("verify_mode1: needs the k = 1 diffusion mode");
  ModeCoefficients c = compute_mode_coeffs(P, u1, 0.0, 1.0);
  ModeOperators ops(P, 1);
  FredholmSolution fs = solve_fredholm(ops, c.btilde, P.alpha0);
  Mode1Report rep;
  rep.alpha1 = c.alpha;
  rep.fredholm_residual = fs.residual;
  double num = 0, den = 0;
  for(int i = 0; i < P.grid->size(); ++i) {
    double a = fs.psi.F[i], b = -P.dp.F[i];
    num = std::max(num, std::abs(a - b));
    den = std::max(den, std::abs(b));
    rep.psi_error_nodewise = std::max(rep.psi_error_nodewise, std::abs(a / b - 1));
  }
  rep.psi_error = num / den;
  rep.J_error = std::abs(apply_Jk(ops, fs.psi, P.alpha0) + c.alpha) / P.g11;
  Vec Psi = -P.dp.F;
  Vec r = ops.L(Psi, 1.0) + ops.K(1.0, P.alpha0) * Psi + c.btilde.F;
  rep.translation_residual = r.lpNorm<Eigen::Infinity>();
  rep.ok = rep.psi_error <= tol_psi && rep.J_error <= tol_J;
  return rep;
}

// Mode-0 homogeneous system as a dense integral-form collocation:
// [I + B K₀, B b₀; J₀, α₀] with K₀φ = −p′ ∫_0^r (ρ/r)^{n−1} g_p φ.
inline Mat mode0_matrix(const StationaryProfile& P, const ModeDiffusion& u0, double gamma) {
  if(u0.k != 0) throw InputError("mode0_matrix: needs the k = 0 diffusion mode");
  const Grid& G = *P.grid;
  const int N = G.size();
  ModeOperators ops(P, 0);
  ModeCoefficients c = compute_mode_coeffs(P, u0, gamma, 0.0);
  Mat Bm = ops.B(0.0);
  Mat A = Mat::Zero(N + 1, N + 1);
  A.topLeftCorner(N, N) = Bm * ops.K_plain(0.0);
  A.topLeftCorner(N, N).diagonal().array() += 1.0;
  A.topRightCorner(N, 1) = Bm * c.b.F;
  A.bottomLeftCorner(1, N) = ops.J(0.0);
  A(N, N) = c.alpha;
  return A;
}

struct Mode0Report {
  bool ok = true;
  std::vector<double> gammas, sigma_min, norm;  // per sampled γ
  double gamma_spread = 0;  // max entrywise difference between sampled matrices
};

inline Mode0Report verify_mode0(const StationaryProfile& P, const ModeDiffusion& u0,
                                const std::vector<double>& gamma_samples, double rel_floor = 1e-6) {
  Mode0Report rep;
  Mat first;
  for(double g : gamma_samples) {
    Mat A = mode0_matrix(P, u0, g);
    Eigen::JacobiSVD<Mat> svd(A);
    const Vec& s = svd.singularValues();
    rep.gammas.push_back(g);
    rep.sigma_min.push_back(s[s.size() - 1]);
    rep.norm.push_back(s[0]);
    if(!(s[s.size() - 1] >= rel_floor * s[0])) rep.ok = false;
    if(first.size() == 0) first = A;
    else rep.gamma_spread = std::max(rep.gamma_spread, (A - first).cwiseAbs().maxCoeff());
  }
  return rep;
}

struct SpectrumResult {
  int n = 0, k_max = 0;
  std::vector<ModeSpectrumEntry> entries;  // k = 2..k_max
  double C_n_closed = 0, C_n_fit = 0, c_fit = 0;
  int fit_k_lo = 0;
  int k_star = -1;                           // −1 if no monotone tail
  double asymptotic_ratio = 0;               // max k|k³γ_k/C_n − 1| over k ∈ [20, k_max]
  double k_nu_max = 0, k_J_psi_tilde_max = 0;  // over k ∈ [10, k_max]
  std::vector<std::vector<int>> multiplicity_classes;
  const ModeSpectrumEntry& at(int k) const { return entries.at(k - 2); }
};

// Each k is independent; `exec(count, fn)` maps fn over 0..count−1 and returns
// the results in order.
struct SerialExecutor {
  template <class Fn>
  auto operator()(int count, Fn fn) const {
    std::vector<decltype(fn(0))> out;
    out.reserve(count);
    for(int i = 0; i < count; ++i) out.push_back(fn(i));
    return out;
  }
};

inline void summarize_spectrum(const StationaryProfile& P, SpectrumResult& S) {
  const int n = P.n;
  S.C_n_closed = (n - 1) * std::pow(P.R, 3) * P.g11;
  // Least squares k³γ_k = C + c/k.
  S.fit_k_lo = S.k_max >= 25 ? 20 : 2;
  double s11 = 0, s12 = 0, s22 = 0, t1 = 0, t2 = 0;
  for(const auto& e : S.entries) {
    if(e.k < S.fit_k_lo) continue;
    double y = std::pow(double(e.k), 3) * e.gamma, x = 1.0 / e.k;
    s11 += 1; s12 += x; s22 += x * x; t1 += y; t2 += x * y;
  }
  double det = s11 * s22 - s12 * s12;
  S.C_n_fit = (t1 * s22 - s12 * t2) / det;
  S.c_fit = (s11 * t2 - s12 * t1) / det;
  S.asymptotic_ratio = 0;
  S.k_nu_max = S.k_J_psi_tilde_max = 0;
  for(const auto& e : S.entries) {
    if(e.k >= 20) {
      double k3 = std::pow(double(e.k), 3);
      S.asymptotic_ratio = std::max(S.asymptotic_ratio, e.k * std::abs(k3 * e.gamma / S.C_n_closed - 1));
    }
    if(e.k >= 10) {
      S.k_nu_max = std::max(S.k_nu_max, e.k * std::abs(e.nu_tilde));
      S.k_J_psi_tilde_max = std::max(S.k_J_psi_tilde_max, e.k * e.J_abs_psi_tilde);
    }
  }
  // Least k* with γ positive and strictly decreasing on [k*, k_max].
  S.k_star = -1;
  const int M = int(S.entries.size());
  for(int j = M - 1; j >= 0; --j) {
    if(!(S.entries[j].gamma > 0)) break;
    if(j + 1 < M && !(S.entries[j + 1].gamma < S.entries[j].gamma)) break;
    S.k_star = S.entries[j].k;
  }
  // Classes of equal γ at relative tolerance 1e−9.
  S.multiplicity_classes.clear();
  std::vector<bool> used(M, false);
  for(int i = 0; i < M; ++i) {
    if(used[i]) continue;
    std::vector<int> cls{S.entries[i].k};
    used[i] = true;
    for(int j = i + 1; j < M; ++j) {
      double gi = S.entries[i].gamma, gj = S.entries[j].gamma;
      if(!used[j] && std::abs(gi - gj) <= 1e-9 * std::max(std::abs(gi), std::abs(gj))) {
        cls.push_back(S.entries[j].k);
        used[j] = true;
      }
    }
    S.multiplicity_classes.push_back(cls);
  }
}

template <class Exec = SerialExecutor>
SpectrumResult compute_spectrum(const StationaryProfile& P, const RateModel& m, int k_max, Exec&& exec = {}) {
  if(k_max < 3) throw InputError("compute_spectrum: k_max must be >= 3");
  SpectrumResult S;
  S.n = P.n;
  S.k_max = k_max;
  S.entries = exec(k_max - 1, [&](int j) { return compute_mode_entry(P, solve_uk(P, m, j + 2)); });
  summarize_spectrum(P, S);
  return S;
}

// Indices j with |γ − γ_j| < tol·max(1, |γ_j|).
inline std::vector<int> near_eigenvalues(const SpectrumResult& S, double gamma, double tol = 1e-7) {
  std::vector<int> out;
  for(const auto& e : S.entries) {
    if(std::abs(gamma - e.gamma) < tol * std::max(1.0, std::abs(e.gamma))) out.push_back(e.k);
  }
  return out;
}

}  // namespace fbspec

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "diffusion_modes.hpp"
#include "radial.hpp"
#include "stationary.hpp"

namespace fbspec {

inline double theta_k(int n, int k) { return k == 0 ? 0.0 : double(k) / (n + 2 * (k - 1)); }

// Integrating factor W = exp(−∫_{r0}^r f_p/v). Stored as Ŵ = W·(r/R)^α₀,
// i.e. a RadialFn of scale α₀; Ŵ → 0 like (R−r)^α₁ at the outer end.
struct WeightFn {
  double r0 = 0;
  RadialFn W;
  Vec log_what;
  double alpha0 = 0, alpha1 = 0;
  double C0 = 0;        // lim W r^α₀ at the center
  double C1 = 0;        // lim W (R−r)^−α₁ at the outer end
  double bound_lo = 0;  // min and max of W r^α₀ (R−r)^−α₁ over nodes
  double bound_hi = 0;
};

inline WeightFn compute_weight(const StationaryProfile& P, double r0) {
  if(!(r0 > 0 && r0 < P.R)) throw InputError("compute_weight: r0 must lie in (0, R)");
  const Grid& G = *P.grid;
  const int N = G.size();
  WeightFn Wf;
  Wf.r0 = r0;
  Wf.alpha0 = P.alpha0;
  Wf.alpha1 = P.alpha1;
  double shift = P.alpha0 * std::log(r0 / P.R) - G.interp_r(P.log_what, r0);
  Wf.log_what = P.log_what.array() + shift;
  Vec what(N);
  for(int i = 0; i < N; ++i) what[i] = std::exp(Wf.log_what[i]);
  Wf.W = RadialFn(P.grid, what, P.alpha0);
  Wf.W.a0 = -P.alpha0;
  Wf.W.a1 = P.alpha1;
  Wf.C0 = std::exp(G.left_limit(Wf.log_what)) * std::pow(P.R, P.alpha0);
  // log Ŵ − α₁ ln(R−r) is regular at R.
  Vec reg(N);
  for(int i = 0; i < N; ++i) reg[i] = Wf.log_what[i] - P.alpha1 * std::log(G.s[i]);
  Wf.C1 = std::exp(G.right_limit(reg));
  Wf.bound_lo = std::numeric_limits<double>::infinity();
  Wf.bound_hi = 0;
  for(int i = 0; i < N; ++i) {
    double b = std::exp(reg[i]) * std::pow(P.R, P.alpha0);
    Wf.bound_lo = std::min(Wf.bound_lo, b);
    Wf.bound_hi = std::max(Wf.bound_hi, b);
  }
  return Wf;
}

// Discrete operators of mode k acting on samples stored at a chosen scale β
// (F = (r/R)^β f). Every operator maps scale β to scale β.
class ModeOperators {
public:
  ModeOperators(const StationaryProfile& P, int k) : P_(P), k_(k), theta_(theta_k(P.n, k)) {
    if(k < 0) throw InputError("mode operators: k must be >= 0");
  }

  const StationaryProfile& profile() const { return P_; }
  int k() const { return k_; }
  double theta() const { return theta_; }
  int m() const { return P_.n + 2 * k_ - 2; }

  // Inverse of L = −v d/dr + f_p:
  // (Bh)(r) = W(r)^−1 ∫_r^R h W / v = r^−1 ∫_r^R (r/η)^{α₀+1+β} (Ŵ_η/Ŵ_r) H/w dη.
  Mat B(double beta) const {
    const Grid& G = *P_.grid;
    const int N = G.size();
    Mat M = up_kernel(G, P_.alpha0 + 1 + beta);
    for(int i = 0; i < N; ++i) {
      for(int j = 0; j < N; ++j) {
        if(M(i, j) != 0) M(i, j) *= std::exp(P_.log_what[j] - P_.log_what[i]) / (G.r[i] * P_.w[j]);
      }
    }
    return M;
  }

  // Bracketed kernel of L̃_k:
  // p′ [θ ∫_r^R (r/ρ)^{k−1} φ + (1−θ)(r/R)^{k−1} ∫_0^R (ρ/R)^{n+k−1} φ − (1−θ) ∫_0^r (ρ/r)^{n+k−1} φ],
  // φ = g_p ψ, with ψ stored at scale β.
  Mat K(double beta, double tail_exp = 0.0) const { return bracket(beta, 1 - theta_, tail_exp); }

  // Same bracket for the unmodified operator L_k, whose full-interval term
  // carries −θ in place of 1−θ.
  Mat K_plain(double beta, double tail_exp = 0.0) const { return bracket(beta, -theta_, tail_exp); }

  // Bracketed kernel of L̃⁰_k: p′ [θ ∫_r^R (r/ρ)^{k−1} φ + (1−θ) ∫_r^R (ρ/r)^{n+k−1} φ].
  Mat K0(double beta) const {
    const Grid& G = *P_.grid;
    const int n = P_.n, k = k_;
    Mat M = theta_ * up_kernel(G, k - 1 + beta);
    M += (1 - theta_) * up_kernel(G, -(n + k - 1) + beta);
    finish_p_rows(M);
    return M;
  }

  // J_k(ψ) = ∫_0^R (ρ/R)^{n+k−1} g_p ψ dρ for ψ stored at scale β.
  RowVec J(double beta, double tail_exp = 0.0) const {
    RowVec f = full_kernel(*P_.grid, P_.n + k_ - 1 - beta, tail_exp);
    return f.cwiseProduct(P_.g_p.F.transpose());
  }

  // L ψ = −v ψ′ + f_p ψ at scale β: −w (r Ψ′) + β w Ψ + f_p Ψ.
  Vec L(const Vec& Psi, double beta) const {
    Vec rd = P_.grid->r_derivative(Psi);
    return (-P_.w.array() * rd.array() + beta * P_.w.array() * Psi.array() + P_.f_p.F.array() * Psi.array())
        .matrix();
  }

  // e_k at scale n+k: (1−θ)(1 − (r/R)^m)(r/R) p′.
  Vec e_k_scaled() const {
    Vec xm = node_power(*P_.grid, m());
    return ((1 - theta_) * (1 - xm.array()) * P_.dp.F.array()).matrix();
  }

  // e_k(R)/f_p(R) boundary data and the like need the scale used by the L̃⁰ solves.
  double lk0_scale() const { return P_.n + k_; }

private:
  Mat bracket(double beta, double full_coef, double tail_exp) const {
    const Grid& G = *P_.grid;
    const int n = P_.n, k = k_;
    Mat M = theta_ * up_kernel(G, k - 1 + beta);
    Mat D = down_kernel(G, n + k - 1 - beta, tail_exp);
    RowVec f = full_kernel(G, n + k - 1 - beta, tail_exp);
    Vec xb = node_power(G, beta + k - 1);
    M -= (1 - theta_) * D;
    M.noalias() += full_coef * xb * f;
    finish_p_rows(M);
    return M;
  }

  // Multiply by g_p on the right and by p′ on the left; the stored p′ is
  // (r/R)p′, so output rows are divided by r/R to stay at scale β.
  void finish_p_rows(Mat& M) const {
    const Grid& G = *P_.grid;
    const int N = G.size();
    for(int j = 0; j < N; ++j) M.col(j) *= P_.g_p.F[j];
    for(int i = 0; i < N; ++i) M.row(i) *= P_.dp.F[i] * G.R / G.r[i];
  }

  const StationaryProfile& P_;
  int k_;
  double theta_;
};

inline RadialFn apply_B(const ModeOperators& ops, const RadialFn& h) {
  return RadialFn(h.grid, ops.B(h.scale) * h.F, h.scale);
}

inline RadialFn apply_Kk(const ModeOperators& ops, const RadialFn& phi, double tail_exp = 0.0) {
  return RadialFn(phi.grid, ops.K(phi.scale, tail_exp) * phi.F, phi.scale);
}

inline double apply_Jk(const ModeOperators& ops, const RadialFn& phi, double tail_exp = 0.0) {
  return ops.J(phi.scale, tail_exp) * phi.F;
}

// Solution of L̃⁰_k φ = h through the integral form φ + B K̃⁰ φ = B h,
// solved densely at scale n+k where every admissible solution is bounded.
struct Lk0Solution {
  RadialFn phi;                 // scale n+k
  double residual = 0;          // integral-equation residual, relative
  double boundary_error = 0;    // |φ(R) − h(R)/f_p(R)| / max(1,|h(R)/f_p(R)|)
};

class Lk0Solver {
public:
  explicit Lk0Solver(const ModeOperators& ops) : ops_(ops), beta_(ops.lk0_scale()) {
    if(ops.k() < 2) throw InputError("solve_Lk0: k must be >= 2");
    Bm_ = ops.B(beta_);
    Mat A = Bm_ * ops.K0(beta_);
    A.diagonal().array() += 1.0;
    A_ = A;
    lu_.compute(A_);
    Jrow_ = ops.J(beta_, ops.profile().alpha0);
  }

  double scale() const { return beta_; }

  // h at any scale ≤ n+k; it is re-expressed at scale n+k.
  Lk0Solution solve(const RadialFn& h) const {
    RadialFn hs = h.scale == beta_ ? h : h.rescaled(beta_);
    Vec rhs = Bm_ * hs.F;
    Vec phi = lu_.solve(rhs);
    Lk0Solution out;
    out.phi = RadialFn(hs.grid, phi, beta_);
    Vec res = A_ * phi - rhs;
    out.residual = res.lpNorm<Eigen::Infinity>() / std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-300);
    double ref = hs.at_R() / ops_.profile().f_p.at_R();
    out.boundary_error = std::abs(out.phi.at_R() - ref) / std::max(1.0, std::abs(ref));
    return out;
  }

  double J(const RadialFn& phi) const {
    if(phi.scale != beta_) throw InputError("Lk0Solver::J: expects the solver scale");
    return Jrow_ * phi.F;
  }

  // Residual of −vφ′ + f_pφ + K̃⁰φ − h re-evaluated at the nodes of another
  // (typically refined) grid via the panel interpolants, relative to max|h|.
  static double pointwise_residual(const ModeOperators& fine, const RadialFn& phi, const RadialFn& h) {
    const Grid& G = *fine.profile().grid;
    double beta = phi.scale;
    Vec Phi(G.size()), H(G.size());
    for(int i = 0; i < G.size(); ++i) {
      Phi[i] = phi.grid->interp_r(phi.F, G.r[i]);
      RadialFn hb = h.scale == beta ? h : h.rescaled(beta);
      H[i] = hb.grid->interp_r(hb.F, G.r[i]);
    }
    Vec res = fine.L(Phi, beta) + fine.K0(beta) * Phi - H;
    return res.lpNorm<Eigen::Infinity>() / std::max(H.lpNorm<Eigen::Infinity>(), 1e-300);
  }

private:
  const ModeOperators& ops_;
  double beta_;
  Mat Bm_, A_;
  Eigen::PartialPivLU<Mat> lu_;
  RowVec Jrow_;
};

inline Lk0Solution solve_Lk0(const ModeOperators& ops, const RadialFn& h) { return Lk0Solver(ops).solve(h); }

// L̃_k φ = h via L̃_k = L̃⁰_k − e_k J_k: φ = ψ + ν φ_k with
// L̃⁰ψ = h, L̃⁰φ_k = e_k, ν = J(ψ)/(1 − J(φ_k)).
struct LkSolution {
  RadialFn phi, psi0, phik;  // scale n+k
  double nu = 0;
  double J_psi0 = 0, J_phik = 0;
  double denominator = 0;
};

inline LkSolution solve_Lk(const Lk0Solver& S, const ModeOperators& ops, const RadialFn& h) {
  LkSolution out;
  RadialFn e(ops.profile().grid, ops.e_k_scaled(), S.scale());
  out.psi0 = S.solve(h).phi;
  out.phik = S.solve(e).phi;
  out.J_psi0 = S.J(out.psi0);
  out.J_phik = S.J(out.phik);
  out.denominator = 1 - out.J_phik;
  if(std::abs(out.denominator) < 1e-12) throw NumericalError("solve_Lk: singular denominator 1 - J(phi_k)");
  out.nu = out.J_psi0 / out.denominator;
  out.phi = RadialFn(out.psi0.grid, out.psi0.F + out.nu * out.phik.F, S.scale());
  return out;
}

inline LkSolution solve_Lk(const ModeOperators& ops, const RadialFn& h) { return solve_Lk(Lk0Solver(ops), ops, h); }

// (I + K B) w = −b̃, ψ = B w, at scale β (0 for k ≥ 2, 1 for k = 1).
struct FredholmSolution {
  RadialFn psi, w;
  double residual = 0;
};

inline FredholmSolution solve_fredholm(const ModeOperators& ops, const RadialFn& btilde, double tail_exp = 0.0) {
  double beta = btilde.scale;
  Mat Bm = ops.B(beta);
  Mat A = ops.K(beta, tail_exp) * Bm;
  A.diagonal().array() += 1.0;
  Vec rhs = -btilde.F;
  Vec w = A.partialPivLu().solve(rhs);
  FredholmSolution out;
  out.w = RadialFn(btilde.grid, w, beta);
  out.psi = RadialFn(btilde.grid, Bm * w, beta);
  out.residual = (A * w - rhs).lpNorm<Eigen::Infinity>() / std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-300);
  return out;
}

// Right side of the J_k(|φ|) bound: ∫_0^R (ξ/R)^{n+k−1} (1/W(ξ)) ∫_ξ^R W|h|/|v| dη dξ.
inline double lk0_bound_integral(const ModeOperators& ops, const RadialFn& h) {
  double beta = h.scale;
  Vec habs = h.F.cwiseAbs();
  Vec inner = -(ops.B(beta) * habs);
  RowVec f = full_kernel(*ops.profile().grid, ops.profile().n + ops.k() - 1 - beta, ops.profile().alpha0);
  return f * inner;
}

}  // namespace fbspec

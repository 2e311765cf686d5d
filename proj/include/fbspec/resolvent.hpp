#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "harmonics.hpp"
#include "spectrum.hpp"

namespace fbspec {

// γ lies within the rejection band of a tabulated eigenvalue γ_j.
class NearEigenvalueError : public NumericalError {
public:
  NearEigenvalueError(int j, double gamma_j, double gamma)
      : NumericalError("gamma = " + fmt(gamma) + " is within the rejection band of gamma_" + std::to_string(j) +
                       " = " + fmt(gamma_j)),
        j_(j),
        gamma_j_(gamma_j) {}
  int j() const { return j_; }
  double gamma_j() const { return gamma_j_; }

private:
  static std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
  }
  int j_;
  double gamma_j_;
};

struct ModeRHS {
  int k = 0;
  RadialFn zeta;  // scale 0
  double z = 0;
};

struct ModeSolution {
  int k = 0;
  RadialFn phi;                  // scale 0
  double y = 0;
  RadialFn weighted_derivative;  // r(R−r)φ′
  double residual = 0;           // max of both equation residuals, relative to max|ζ| + |z|
  std::string route;             // "direct", "dense" or "neumann"
  int iterations = 0;
};

struct ResolventOptions {
  double near_tol = 1e-7;
  int neumann_from = 8;
  int neumann_max = 200;
  double neumann_tol = 1e-15;
  // Allow γ equal to a tabulated γ_j and solve only modes outside its class.
  bool eigen_regime = false;
};

// Dense integral form of the unmodified mode system:
// [I + B K, B b; J, α] acting on (φ, y), every function at scale 0.
inline Mat direct_matrix(const ModeOperators& ops, const ModeCoefficients& c, const Mat& Bm) {
  const int N = ops.profile().grid->size();
  Mat A = Mat::Zero(N + 1, N + 1);
  A.topLeftCorner(N, N) = Bm * ops.K_plain(0.0);
  A.topLeftCorner(N, N).diagonal().array() += 1.0;
  A.topRightCorner(N, 1) = Bm * c.b.F;
  A.bottomLeftCorner(1, N) = ops.J(0.0);
  A(N, N) = c.alpha;
  return A;
}

// Per-mode solver at fixed γ. Factorizations are built once and reused for
// every right-hand side of the same k.
class ModeResolvent {
public:
  ModeResolvent(const StationaryProfile& P, const ModeDiffusion& md, double gamma, const SpectrumResult* table = nullptr,
                ResolventOptions opt = {})
      : P_(P), k_(md.k), gamma_(gamma), opt_(opt), ops_(P, md.k) {
    if(k_ == 1) throw InputError("resolvent: k = 1 is the translation mode and is rejected");
    if(k_ < 0) throw InputError("resolvent: k must be >= 0");
    if(table) check_eigenvalues(*table);
    coeffs_ = compute_mode_coeffs(P, md, gamma, 0.0);
    Bm_ = ops_.B(0.0);
    J_ = ops_.J(0.0);
    if(k_ == 0) {
      direct_lu_.compute(direct_matrix(ops_, coeffs_, Bm_));
      return;
    }
    build_transform(md);
  }

  int k() const { return k_; }
  double gamma() const { return gamma_; }
  const ModeCoefficients& coefficients() const { return coeffs_; }
  const RadialFn& c_k() const { return c_; }
  const RadialFn& c_k_direct() const { return c_direct_; }
  const RadialFn& q() const { return q_; }
  double alpha_tilde() const { return alpha_tilde_; }
  double alpha_tilde_direct() const { return alpha_tilde_direct_; }

  // Production path: k = 0 directly, k ≥ 2 through the transformed unknown.
  ModeSolution solve(const RadialFn& zeta, double z) const {
    check_rhs(zeta);
    if(k_ == 0) return solve_direct(zeta, z);
    Vec zh = zeta.F + q_.F * z;
    Vec rhs = Bm_ * (zh - c_.F * (z / alpha_tilde_));
    Vec psi;
    ModeSolution out;
    bool done = false;
    if(k_ >= opt_.neumann_from) {
      // ψ = g − B(Kψ − (c/α̃) Jψ), iterated while it contracts.
      psi = rhs;
      double scale = std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-300), prev = std::numeric_limits<double>::infinity();
      for(int it = 1; it <= opt_.neumann_max; ++it) {
        Vec next = rhs - BK_ * psi + Bc_ * (J_.dot(psi) / alpha_tilde_);
        double step = (next - psi).lpNorm<Eigen::Infinity>() / scale;
        psi = std::move(next);
        out.iterations = it;
        if(step <= opt_.neumann_tol) {
          done = true;
          break;
        }
        if(!(step < prev) && it > 3) break;
        prev = step;
      }
      out.route = "neumann";
    }
    if(!done) {
      ensure_dense();
      psi = dense_lu_->solve(rhs);
      out.route = "dense";
    }
    double y = (z - J_.dot(psi)) / alpha_tilde_;
    Vec phi = psi - q_.F * y;
    return finish(out, phi, y, zeta, z);
  }

  // Dense Nyström solve of the unmodified system, used for k = 0 and as an
  // independent route for k ≥ 2.
  ModeSolution solve_direct(const RadialFn& zeta, double z) const {
    check_rhs(zeta);
    const int N = P_.grid->size();
    if(!direct_lu_.rows()) direct_lu_.compute(direct_matrix(ops_, coeffs_, Bm_));
    Vec rhs(N + 1);
    rhs.head(N) = Bm_ * zeta.F;
    rhs[N] = z;
    Vec x = direct_lu_.solve(rhs);
    ModeSolution out;
    out.route = "direct";
    return finish(out, x.head(N), x[N], zeta, z);
  }

  // Residuals of both equations with φ′ from the panel interpolants.
  double residual(const Vec& phi, double y, const RadialFn& zeta, double z) const {
    Vec r1 = ops_.L(phi, 0.0) + ops_.K_plain(0.0) * phi + coeffs_.b.F * y - zeta.F;
    double r2 = J_.dot(phi) + coeffs_.alpha * y - z;
    double scale = std::max(zeta.F.lpNorm<Eigen::Infinity>() + std::abs(z), 1e-300);
    return std::max(r1.lpNorm<Eigen::Infinity>(), std::abs(r2)) / scale;
  }

private:
  void check_eigenvalues(const SpectrumResult& table) {
    std::vector<int> near = near_eigenvalues(table, gamma_, opt_.near_tol);
    if(near.empty()) return;
    for(int j : near) {
      if(j == k_) throw NearEigenvalueError(j, table.at(j).gamma, gamma_);
    }
    if(!opt_.eigen_regime) throw NearEigenvalueError(near.front(), table.at(near.front()).gamma, gamma_);
  }

  void check_rhs(const RadialFn& zeta) const {
    if(zeta.scale != 0) throw InputError("resolvent: zeta must be stored at scale 0");
    if(zeta.size() != P_.grid->size()) throw InputError("resolvent: zeta does not live on the profile grid");
  }

  void build_transform(const ModeDiffusion& md) {
    const Grid& G = *P_.grid;
    const int N = G.size(), n = P_.n, k = k_, m = n + 2 * k - 2;
    const double th = ops_.theta(), sR = P_.dsigma_R, R = P_.R;
    Vec xk2 = node_power(G, k - 2), x = node_power(G, 1.0);
    // q = (r/R)^{k−1} p′, bounded for k ≥ 2.
    q_ = RadialFn(P_.grid, (xk2.array() * P_.dp.F.array()).matrix(), 0.0);
    // v_k·(r/R) = g_p·(r p′/R) + σ′(R) g_σ (r/R)² u_k.
    Vec V1(N);
    for(int i = 0; i < N; ++i) V1[i] = P_.g_p.F[i] * P_.dp.F[i] + sR * P_.g_s.F[i] * x[i] * x[i] * md.u.F[i];
    const double a0 = P_.alpha0;
    Vec U = up_kernel(G, 1.0) * V1;                  // (r/R)·∫_r^R v_k
    Vec D = down_kernel(G, m - 1.0, a0) * V1;        // (r/R)·∫_0^r (ρ/r)^m v_k
    double Fm = full_kernel(G, m - 1.0, a0) * V1;    // ∫_0^R (ρ/R)^m v_k
    Vec c(N);
    for(int i = 0; i < N; ++i) {
      double gstar = P_.g.F[i], fstar = P_.f.F[i];
      double br = th * U[i] / x[i] + (1 - th) * Fm - (1 - th) * D[i] / x[i];
      double curly = (P_.g11 - gstar) * P_.dp.F[i] * xk2[i] + (n + k - 2) * fstar * xk2[i] / R +
                     P_.f_s.F[i] * (P_.dsigma.F[i] - sR * x[i] * md.u.F[i]) * xk2[i] * x[i] -
                     P_.dp.F[i] * xk2[i] * br;
      c[i] = curly;
    }
    c_ = RadialFn(P_.grid, c, 0.0);
    double cg = gamma_factor(n, k) * gamma_ / (R * R * R);
    alpha_tilde_ = cg + P_.g11 - Fm;
    // Defining forms: c = b + α q − L̃q, α̃ = α − J(q).
    Mat Kt = ops_.K(0.0);
    Vec Lq = ops_.L(q_.F, 0.0) + Kt * q_.F;
    c_direct_ = RadialFn(P_.grid, coeffs_.b.F + coeffs_.alpha * q_.F - Lq, 0.0);
    alpha_tilde_direct_ = coeffs_.alpha - J_.dot(q_.F);
    if(!(std::abs(alpha_tilde_) > 1e-14 * (std::abs(cg) + P_.g11))) {
      throw NumericalError("resolvent: alpha~_k(gamma) vanishes at k = " + std::to_string(k));
    }
    BK_ = Bm_ * Kt;
    Bc_ = Bm_ * c_.F;
  }

  void ensure_dense() const {
    if(dense_lu_) return;
    Mat A = BK_ - Bc_ * (J_ / alpha_tilde_);
    A.diagonal().array() += 1.0;
    dense_lu_ = std::make_shared<Eigen::PartialPivLU<Mat>>(A);
  }

  ModeSolution& finish(ModeSolution& out, const Vec& phi, double y, const RadialFn& zeta, double z) const {
    const Grid& G = *P_.grid;
    out.k = k_;
    out.phi = RadialFn(P_.grid, phi, 0.0);
    out.y = y;
    Vec rd = G.r_derivative(phi);
    Vec wd(G.size());
    for(int i = 0; i < G.size(); ++i) wd[i] = G.s[i] * rd[i];
    out.weighted_derivative = RadialFn(P_.grid, wd, 0.0);
    out.residual = residual(phi, y, zeta, z);
    return out;
  }

  const StationaryProfile& P_;
  int k_;
  double gamma_;
  ResolventOptions opt_;
  ModeOperators ops_;
  ModeCoefficients coeffs_;
  Mat Bm_, BK_;
  RowVec J_;
  Vec Bc_;
  RadialFn q_, c_, c_direct_;
  double alpha_tilde_ = 0, alpha_tilde_direct_ = 0;
  mutable Eigen::PartialPivLU<Mat> direct_lu_;
  mutable std::shared_ptr<Eigen::PartialPivLU<Mat>> dense_lu_;
};

inline ModeSolution solve_mode_system(const StationaryProfile& P, const ModeDiffusion& md, double gamma,
                                      const RadialFn& zeta, double z, const SpectrumResult* table = nullptr,
                                      ResolventOptions opt = {}) {
  return ModeResolvent(P, md, gamma, table, opt).solve(zeta, z);
}

// Ratio of the left side of the uniform estimate to max|ζ| + |z|.
inline double estimate_ratio(const ModeSolution& s, const RadialFn& zeta, double z) {
  double lhs = detail::sup_abs(s.phi) + detail::sup_abs(s.weighted_derivative) + std::pow(1.0 + s.k, 3) * std::abs(s.y);
  return lhs / (detail::sup_abs(zeta) + std::abs(z));
}

struct AssembledSolution {
  RadialSpectrum u;
  ScalarSpectrum eta;
  double alpha = 2;
  double norm_in = 0;   // ‖h‖_{X_α} + ‖ρ‖_{Y_α}
  double norm_out = 0;  // ‖u‖_{X_α¹} + ‖η‖_{Y_α³}
  double ratio = 0;
  double residual_max = 0;
  std::map<std::pair<int, int>, double> residuals;
};

// Solves every (k, l) present in (h, ρ). Missing coefficients are zero.
// Exec maps a function over 0..count−1 in order (see SerialExecutor).
template <class Exec = SerialExecutor>
AssembledSolution assemble_solution(const StationaryProfile& P, const RateModel& model, double gamma,
                                    const RadialSpectrum& h, const ScalarSpectrum& rho, double alpha,
                                    const SpectrumResult* table = nullptr, ResolventOptions opt = {},
                                    Exec&& exec = {}) {
  if(h.n != P.n || rho.n != P.n) throw InputError("assemble_solution: spectra must match the profile dimension");
  std::map<int, std::vector<int>> by_k;
  auto add_key = [&](int k, int l) {
    auto& v = by_k[k];
    if(std::find(v.begin(), v.end(), l) == v.end()) v.push_back(l);
  };
  for(const auto& kv : h.entries) add_key(kv.first.first, kv.first.second);
  for(const auto& kv : rho.entries) add_key(kv.first.first, kv.first.second);
  std::vector<int> excluded;
  if(table) {
    std::vector<int> near = near_eigenvalues(*table, gamma, opt.near_tol);
    if(!near.empty() && !opt.eigen_regime) {
      throw NearEigenvalueError(near.front(), table->at(near.front()).gamma, gamma);
    }
    excluded = near;
  }
  const int N = P.grid->size();
  auto is_zero = [&](int k, int l) {
    const RadialFn* f = h.find(k, l);
    const double* a = rho.find(k, l);
    return (!f || f->F.cwiseAbs().maxCoeff() == 0) && (!a || *a == 0);
  };
  std::vector<std::pair<int, std::vector<int>>> work;
  for(auto& [k, ls] : by_k) {
    std::sort(ls.begin(), ls.end());
    bool rejected = k == 1 || std::find(excluded.begin(), excluded.end(), k) != excluded.end();
    if(rejected) {
      for(int l : ls) {
        if(!is_zero(k, l)) {
          throw InputError("assemble_solution: nonzero coefficient on rejected mode (k, l) = (" + std::to_string(k) +
                           ", " + std::to_string(l) + ")");
        }
      }
      continue;
    }
    work.emplace_back(k, ls);
  }
  using Solved = std::vector<std::pair<int, ModeSolution>>;
  std::vector<Solved> solved = exec(int(work.size()), [&](int j) {
    int k = work[j].first;
    ModeDiffusion md = solve_uk(P, model, k);
    ModeResolvent res(P, md, gamma, nullptr, opt);
    Solved out;
    for(int l : work[j].second) {
      const RadialFn* f = h.find(k, l);
      const double* a = rho.find(k, l);
      RadialFn zeta = f ? *f : RadialFn(P.grid, Vec::Zero(N), 0.0);
      out.emplace_back(l, res.solve(zeta, a ? *a : 0.0));
    }
    return out;
  });
  AssembledSolution A;
  A.alpha = alpha;
  A.u = RadialSpectrum(P.n);
  A.eta = ScalarSpectrum(P.n);
  for(size_t j = 0; j < work.size(); ++j) {
    for(auto& [l, s] : solved[j]) {
      A.u.set(work[j].first, l, s.phi);
      A.eta.set(work[j].first, l, s.y);
      A.residuals[{work[j].first, l}] = s.residual;
      A.residual_max = std::max(A.residual_max, s.residual);
    }
  }
  A.norm_in = norm(h, NormSpace::X, alpha) + norm(rho, NormSpace::Y, alpha);
  A.norm_out = norm(A.u, NormSpace::X1, alpha) + norm(A.eta, NormSpace::Y3, alpha);
  A.ratio = A.norm_in > 0 ? A.norm_out / A.norm_in : 0.0;
  return A;
}

}  // namespace fbspec

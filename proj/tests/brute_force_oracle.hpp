#pragma once

#include <cmath>

#include <Eigen/Dense>

#include <fbspec/diffusion_modes.hpp>
#include <fbspec/harmonics.hpp>
#include <fbspec/singular_solver.hpp>
#include <fbspec/stationary.hpp>

namespace fbspec::fixtures {

struct BruteForceMode {
  double gamma = 0;
  Eigen::VectorXd r, psi;
};

// Dense collocation of L̃_k ψ = −b̃_k on the uniform grid r_i = iR/N written
// straight from the operator and coefficient definitions: centered differences
// for ψ′, trapezoid sums for every integral, exact kernel ratios (i/j)^e.
// Only pointwise profile values are taken from P and md.
inline BruteForceMode brute_force_mode(const StationaryProfile& P, const ModeDiffusion& md, int N) {
  const int n = P.n, k = md.k, M = N + 1;
  const int m = n + 2 * k - 2;
  const double R = P.R, h = R / N, th = theta_k(n, k), sR = P.dsigma_R;
  Eigen::VectorXd r(M), v(M), fp(M), gp(M), fs(M), gs(M), u(M), Q(M), Pr(M);
  for(int i = 0; i < M; ++i) {
    r[i] = i * h;
    double x = double(i) / N;
    v[i] = (i == 0 || i == N) ? 0.0 : P.v(r[i]);
    fp[i] = P.f_p(r[i]);
    gp[i] = P.g_p(r[i]);
    fs[i] = P.f_s(r[i]);
    gs[i] = P.g_s(r[i]);
    u[i] = md.u(r[i]);
    // x p′ is stored directly; p′ and x^{k−1}p′ follow from it.
    double P1 = i == 0 ? 0.0 : (i == N ? P.dp.at_R() : P.dp.grid->interp_r(P.dp.F, r[i]));
    Pr[i] = i == 0 ? 0.0 : P1 / x;  // p′, only used with a vanishing factor at i = 0
    Q[i] = i == 0 ? 0.0 : P1 * std::pow(x, k - 2);
  }
  auto up = [&](int i, int j) { return (j == i || j == N) ? h / 2 : h; };   // ∫_{r_i}^R
  auto down = [&](int i, int j) { return (j == 0 || j == i) ? h / 2 : h; }; // ∫_0^{r_i}
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(M, M);
  for(int i = 0; i < M; ++i) {
    A(i, i) += fp[i];
    if(i > 0 && i < N) {
      A(i, i + 1) += -v[i] / (2 * h);
      A(i, i - 1) += v[i] / (2 * h);
    }
    if(i == 0) continue;  // every bracket term vanishes at the center for k ≥ 2
    for(int j = i; i < N && j <= N; ++j) {
      A(i, j) += th * Pr[i] * up(i, j) * std::pow(double(i) / j, k - 1) * gp[j];
    }
    for(int j = 0; j <= i; ++j) {
      A(i, j) -= (1 - th) * Pr[i] * down(i, j) * std::pow(double(j) / i, n + k - 1) * gp[j];
    }
    for(int j = 0; j < M; ++j) {
      double w = (j == 0 || j == N) ? h / 2 : h;
      A(i, j) += (1 - th) * Q[i] * w * std::pow(double(j) / N, n + k - 1) * gp[j];
    }
  }
  // b̃_k.
  Eigen::VectorXd gu = (gs.array() * u.array()).matrix(), bt(M);
  double full = 0;
  for(int j = 0; j < M; ++j) {
    double w = (j == 0 || j == N) ? h / 2 : h;
    full += w * r[j] * std::pow(double(j) / N, m) * gu[j];
  }
  for(int i = 0; i < M; ++i) {
    double x = double(i) / N;
    double upi = 0, dni = 0;
    if(i < N) {
      for(int j = i; j <= N; ++j) upi += up(i, j) * r[j] * gu[j];
    }
    if(i > 0) {
      for(int j = 0; j <= i; ++j) dni += down(i, j) * r[j] * std::pow(double(j) / i, m) * gu[j];
    }
    bt[i] = P.g11 * Q[i] - sR * std::pow(x, k) * fs[i] * u[i] -
            (sR / R) * Q[i] * (th * upi + (1 - th) * full - (1 - th) * dni);
  }
  BruteForceMode out;
  out.r = r;
  out.psi = A.partialPivLu().solve(-bt);
  double i1 = 0, i2 = 0;
  for(int j = 0; j < M; ++j) {
    double w = (j == 0 || j == N) ? h / 2 : h;
    i1 += w * std::pow(double(j) / N, n + 2 * k - 1) * gu[j];
    i2 += w * std::pow(double(j) / N, n + k - 1) * gp[j] * out.psi[j];
  }
  out.gamma = (n - 1) * R * R * R / ((lambda_k(n, k) - n + 1) * k) * (P.g11 - sR * i1 + i2);
  return out;
}

}  // namespace fbspec::fixtures

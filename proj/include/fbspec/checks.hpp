#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "resolvent.hpp"

namespace fbspec {

// Uniform on [−1, 1] from raw 64-bit draws, so streams do not depend on the
// standard library's distribution implementations.
inline double uniform_pm1(std::mt19937_64& rng) { return 2.0 * double(rng() >> 11) * 0x1.0p-53 - 1.0; }

// Random Chebyshev series Σ a_j T_j(2r/R − 1) with a_j uniform on [−1, 1].
inline Vec random_smooth(const Grid& G, std::mt19937_64& rng, int terms = 6) {
  std::vector<double> a(terms);
  for(double& x : a) x = uniform_pm1(rng);
  Vec out(G.size());
  for(int i = 0; i < G.size(); ++i) {
    double x = 2 * G.r[i] / G.R - 1, T0 = 1, T1 = x, v = a[0] + (terms > 1 ? a[1] * x : 0);
    for(int j = 2; j < terms; ++j) {
      double T2 = 2 * x * T1 - T0;
      v += a[j] * T2;
      T0 = T1;
      T1 = T2;
    }
    out[i] = v;
  }
  return out;
}

struct ManufacturedReport {
  int k = 0;
  double phi_error = 0;  // sup|φ − φ*| / sup|φ*|
  double y_error = 0;    // |y/y* − 1|
  double residual = 0;
};

// φ*(r) = cos(1.3x) + 0.4x² + 0.1 sin(3x), x = r/R, and y* = 0.7; the right
// sides use the exact derivative of φ*.
inline ManufacturedReport manufactured_check(const StationaryProfile& P, const ModeResolvent& res) {
  const Grid& G = *P.grid;
  const int N = G.size(), k = res.k();
  Vec ph(N), dph(N);
  for(int i = 0; i < N; ++i) {
    double x = G.r[i] / P.R;
    ph[i] = std::cos(1.3 * x) + 0.4 * x * x + 0.1 * std::sin(3 * x);
    dph[i] = (-1.3 * std::sin(1.3 * x) + 0.8 * x + 0.3 * std::cos(3 * x)) / P.R;
  }
  const double ys = 0.7;
  ModeOperators ops(P, k);
  const ModeCoefficients& c = res.coefficients();
  Vec zeta = (-P.v.F.array() * dph.array() + P.f_p.F.array() * ph.array()).matrix() + ops.K_plain(0.0) * ph + c.b.F * ys;
  double z = ops.J(0.0).dot(ph) + c.alpha * ys;
  ModeSolution s = res.solve(RadialFn(P.grid, zeta, 0.0), z);
  ManufacturedReport rep;
  rep.k = k;
  rep.phi_error = (s.phi.F - ph).lpNorm<Eigen::Infinity>() / ph.lpNorm<Eigen::Infinity>();
  rep.y_error = std::abs(s.y / ys - 1);
  rep.residual = s.residual;
  return rep;
}

struct RatioReport {
  int k = 0;
  double ratio_max = 0;     // max over samples of the uniform-estimate ratio
  double residual_max = 0;
};

// Randomized inputs (ζ, z) for one mode; the stream depends only on (seed, k).
inline RatioReport estimate_ratios(const StationaryProfile& P, const ModeResolvent& res, int samples,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed * 1000003ull + std::uint64_t(res.k()));
  RatioReport rep;
  rep.k = res.k();
  for(int t = 0; t < samples; ++t) {
    RadialFn zeta(P.grid, random_smooth(*P.grid, rng), 0.0);
    double z = uniform_pm1(rng);
    ModeSolution s = res.solve(zeta, z);
    rep.ratio_max = std::max(rep.ratio_max, estimate_ratio(s, zeta, z));
    rep.residual_max = std::max(rep.residual_max, s.residual);
  }
  return rep;
}

}  // namespace fbspec

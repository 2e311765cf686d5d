#include <cmath>

#include <gtest/gtest.h>

#include <fbspec/radial.hpp>

#include "common.hpp"

using namespace fbspec;

namespace {

const Grid& grid() { return *fixtures::defaults().P.grid; }

Vec powers(double a) {
  const Grid& G = grid();
  Vec out(G.size());
  for(int i = 0; i < G.size(); ++i) out[i] = std::pow(G.r[i] / G.R, a);
  return out;
}

}  // namespace

TEST(Grid, NodesAreIncreasingInsideInterval) {
  const Grid& G = grid();
  EXPECT_EQ(G.size(), 510);
  EXPECT_GT(G.r[0], 0.0);
  for(int i = 1; i < G.size(); ++i) EXPECT_GT(G.r[i], G.r[i - 1]);
  EXPECT_LT(G.r[G.size() - 1], G.R);
  for(int i = 0; i < G.size(); ++i) EXPECT_NEAR(G.s[i], G.R - G.r[i], 1e-12 * G.R);
}

TEST(Grid, IntegratesPowersAccurately) {
  const Grid& G = grid();
  for(double a : {0.0, 0.5, 1.0, 3.0, 10.0}) {
    EXPECT_NEAR(G.integrate(powers(a)), G.R / (a + 1), 1e-12 * G.R) << "a=" << a;
  }
}

TEST(Grid, DerivativesOfPowers) {
  const Grid& G = grid();
  for(double a : {1.0, 2.5, 4.0}) {
    Vec F = powers(a), rd = G.r_derivative(F), d = G.derivative(F);
    // Next to R the panel derivative is scaled by r/(R − r), which amplifies
    // rounding in F; the bound there follows that factor.
    for(int i = 0; i < G.size(); ++i) {
      double tol = 1e-9 * std::max(1.0, a) * std::max(1.0, 1e-4 * G.r[i] / G.s[i]);
      EXPECT_NEAR(rd[i], a * F[i], tol) << "node " << i;
      EXPECT_NEAR(d[i] * G.r[i], a * F[i], tol) << "node " << i;
    }
  }
}

TEST(Grid, InterpolationAndLimits) {
  const Grid& G = grid();
  Vec F = powers(2.0);
  for(double x : {0.01, 0.3, 0.77, 0.999}) EXPECT_NEAR(G.interp_r(F, x * G.R), x * x, 1e-12);
  EXPECT_NEAR(G.right_limit(F), 1.0, 1e-12);
  EXPECT_NEAR(G.left_limit(F), 0.0, 1e-12);
}

TEST(Grid, RefinedGridDoublesNodes) {
  const Grid& G = grid();
  Grid H = G.refined();
  EXPECT_EQ(H.size(), 2 * G.size());
  EXPECT_EQ(H.R, G.R);
  EXPECT_NEAR(H.integrate(Vec::Ones(H.size())), G.R, 1e-12 * G.R);
}

TEST(Kernels, UpKernelOnConstants) {
  // ∫_r^R (r/ρ)^A dρ = r (1 − (r/R)^{A−1}) / (A − 1).
  const Grid& G = grid();
  for(double A : {0.0, 2.0, 4.5}) {
    Vec out = up_kernel(G, A) * Vec::Ones(G.size());
    for(int i = 0; i < G.size(); ++i) {
      double r = G.r[i], ref = r * (1 - std::pow(r / G.R, A - 1)) / (A - 1);
      EXPECT_NEAR(out[i], ref, 1e-11 * G.R) << "A=" << A << " i=" << i;
    }
  }
}

TEST(Kernels, DownAndFullKernelsOnPowers) {
  // ∫_0^r (ρ/r)^A (ρ/R)^a dρ = r (r/R)^a / (A + a + 1), ∫_0^R (ρ/R)^{A+a} = R / (A + a + 1).
  const Grid& G = grid();
  for(double A : {2.0, 5.0}) {
    for(double a : {0.0, 1.5}) {
      Vec F = powers(a);
      Vec out = down_kernel(G, A) * F;
      for(int i = 0; i < G.size(); ++i) {
        double ref = G.r[i] * F[i] / (A + a + 1);
        EXPECT_NEAR(out[i], ref, 1e-11 * G.R);
      }
      EXPECT_NEAR(full_kernel(G, A).dot(F), G.R / (A + a + 1), 1e-11 * G.R);
    }
  }
}

TEST(RadialFn, ScaleRoundTrip) {
  const auto& P = fixtures::defaults().P;
  const Grid& G = *P.grid;
  Vec F = powers(1.0);
  RadialFn f(P.grid, F, 0.0);
  RadialFn g = f.rescaled(2.0);
  for(int i = 0; i < G.size(); ++i) EXPECT_NEAR(g.node(i), f.node(i), 1e-14);
  EXPECT_THROW(g.rescaled(1.0), InputError);
  EXPECT_NEAR(f(0.5 * G.R), 0.5, 1e-12);
  EXPECT_NEAR(f.at_R(), 1.0, 1e-12);
  EXPECT_EQ(f.full().size(), G.size() + 2);
}

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include <fbspec/checks.hpp>
#include <fbspec/resolvent.hpp>

#include "common.hpp"

using namespace fbspec;

namespace {

const fixtures::Defaults& D() { return fixtures::defaults(); }

const SpectrumResult& table() {
  static const SpectrumResult S = compute_spectrum(D().P, D().model, 12);
  return S;
}

RadialFn zero_fn() { return RadialFn(D().P.grid, Vec::Zero(D().P.grid->size()), 0.0); }

double rel(const Vec& a, const Vec& b) { return (a - b).lpNorm<Eigen::Infinity>() / b.lpNorm<Eigen::Infinity>(); }

}  // namespace

TEST(Resolvent, ZeroDataGiveZeroSolution) {
  for(int k : {0, 2, 9}) {
    ModeResolvent R(D().P, D().modes[k], 1.0);
    ModeSolution s = R.solve(zero_fn(), 0.0);
    EXPECT_EQ(s.phi.F.cwiseAbs().maxCoeff(), 0.0) << "k=" << k;
    EXPECT_EQ(s.y, 0.0) << "k=" << k;
  }
}

TEST(Resolvent, ManufacturedSolutionsRecovered) {
  for(int k : {0, 2, 7, 20}) {
    ModeResolvent R(D().P, D().modes[k], 1.0, &table());
    ManufacturedReport m = manufactured_check(D().P, R);
    EXPECT_LE(m.phi_error, 1e-6) << "k=" << k;
    EXPECT_LE(m.y_error, 1e-6) << "k=" << k;
    EXPECT_LE(m.residual, 1e-8) << "k=" << k;
  }
}

TEST(Resolvent, ManufacturedAtOtherGamma) {
  for(int k : {3, 11}) {
    ModeResolvent R(D().P, D().modes[k], 0.05);
    ManufacturedReport m = manufactured_check(D().P, R);
    EXPECT_LE(m.phi_error, 1e-6) << "k=" << k;
    EXPECT_LE(m.y_error, 1e-6) << "k=" << k;
  }
}

TEST(Resolvent, TransformedAndDirectRoutesAgree) {
  std::mt19937_64 rng(11);
  for(int k : {2, 5, 12, 25}) {
    ModeResolvent R(D().P, D().modes[k], 1.0);
    RadialFn zeta(D().P.grid, random_smooth(*D().P.grid, rng), 0.0);
    double z = uniform_pm1(rng);
    ModeSolution a = R.solve(zeta, z), b = R.solve_direct(zeta, z);
    EXPECT_EQ(a.route, k >= 8 ? "neumann" : "dense");
    EXPECT_EQ(b.route, "direct");
    EXPECT_LE(rel(a.phi.F, b.phi.F), 1e-6) << "k=" << k;
    EXPECT_LE(std::abs(a.y - b.y), 1e-6 * std::abs(b.y)) << "k=" << k;
    EXPECT_LE(a.residual, 1e-8);
    EXPECT_LE(b.residual, 1e-8);
  }
}

TEST(Resolvent, NeumannMatchesDenseSolve) {
  std::mt19937_64 rng(13);
  ResolventOptions dense;
  dense.neumann_from = 1000;
  for(int k : {8, 30}) {
    ModeResolvent a(D().P, D().modes[k], 1.0), b(D().P, D().modes[k], 1.0, nullptr, dense);
    RadialFn zeta(D().P.grid, random_smooth(*D().P.grid, rng), 0.0);
    ModeSolution sa = a.solve(zeta, 0.3), sb = b.solve(zeta, 0.3);
    EXPECT_EQ(sa.route, "neumann");
    EXPECT_EQ(sb.route, "dense");
    EXPECT_LE(rel(sa.phi.F, sb.phi.F), 1e-12) << "k=" << k;
  }
}

TEST(Resolvent, TransformCoefficientsMatchDefiningForms) {
  for(int k : {2, 6, 19}) {
    ModeResolvent R(D().P, D().modes[k], 1.0);
    EXPECT_LE(rel(R.c_k().F, R.c_k_direct().F), 1e-8) << "k=" << k;
    EXPECT_NEAR(R.alpha_tilde(), R.alpha_tilde_direct(), 1e-10 * std::abs(R.alpha_tilde_direct())) << "k=" << k;
  }
}

TEST(Resolvent, UniformEstimateRatioBounded) {
  double worst = 0;
  for(int k : {0, 2, 10, 30}) {
    ModeResolvent R(D().P, D().modes[k], 1.0);
    RatioReport r = estimate_ratios(D().P, R, 10, 77);
    EXPECT_TRUE(std::isfinite(r.ratio_max));
    EXPECT_GT(r.ratio_max, 0.0);
    EXPECT_LE(r.residual_max, 1e-8);
    worst = std::max(worst, r.ratio_max);
  }
  EXPECT_TRUE(std::isfinite(worst));
}

TEST(Resolvent, RejectsTranslationMode) {
  EXPECT_THROW(ModeResolvent(D().P, D().modes[1], 1.0), InputError);
}

TEST(Resolvent, RejectsGammaNearTabulatedEigenvalue) {
  double g5 = table().at(5).gamma;
  try {
    ModeResolvent R(D().P, D().modes[2], g5 * (1 + 1e-9), &table());
    FAIL() << "expected rejection";
  } catch(const NearEigenvalueError& e) {
    EXPECT_EQ(e.j(), 5);
    EXPECT_EQ(e.gamma_j(), g5);
    EXPECT_NE(std::string(e.what()).find("gamma_5"), std::string::npos);
  }
  EXPECT_NO_THROW(ModeResolvent(D().P, D().modes[2], g5 * (1 + 1e-6), &table()));
}

TEST(Resolvent, EigenRegimeExcludesOnlyTheResonantClass) {
  ResolventOptions opt;
  opt.eigen_regime = true;
  double g5 = table().at(5).gamma;
  EXPECT_NO_THROW(ModeResolvent(D().P, D().modes[3], g5, &table(), opt));
  EXPECT_THROW(ModeResolvent(D().P, D().modes[5], g5, &table(), opt), NearEigenvalueError);
}

TEST(Resolvent, RejectsForeignRightSides) {
  ModeResolvent R(D().P, D().modes[2], 1.0);
  RadialFn scaled(D().P.grid, Vec::Ones(D().P.grid->size()), 1.0);
  EXPECT_THROW(R.solve(scaled, 0.0), InputError);
}

TEST(Assembly, ZeroInputGivesZeroOutput) {
  RadialSpectrum h(3);
  ScalarSpectrum rho(3);
  h.set(0, 0, zero_fn());
  h.set(2, 3, zero_fn());
  rho.set(2, 3, 0.0);
  AssembledSolution A = assemble_solution(D().P, D().model, 1.0, h, rho, 2.0);
  EXPECT_EQ(A.norm_in, 0.0);
  EXPECT_EQ(A.norm_out, 0.0);
  EXPECT_EQ(A.ratio, 0.0);
  for(const auto& [key, f] : A.u.entries) EXPECT_EQ(f.F.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Assembly, SingleModeInputStaysOnThatMode) {
  std::mt19937_64 rng(17);
  RadialSpectrum h(3);
  ScalarSpectrum rho(3);
  h.set(3, 4, RadialFn(D().P.grid, random_smooth(*D().P.grid, rng), 0.0));
  rho.set(3, 1, 0.5);
  AssembledSolution A = assemble_solution(D().P, D().model, 1.0, h, rho, 2.0);
  ASSERT_EQ(A.u.entries.size(), 2u);
  for(const auto& [key, f] : A.u.entries) EXPECT_EQ(key.first, 3);
  for(const auto& [key, y] : A.eta.entries) EXPECT_EQ(key.first, 3);
  EXPECT_NE(*A.eta.find(3, 1), 0.0);
  EXPECT_LE(A.residual_max, 1e-8);
}

TEST(Assembly, RejectsTranslationCoefficients) {
  RadialSpectrum h(3);
  ScalarSpectrum rho(3);
  rho.set(1, 2, 1.0);
  try {
    assemble_solution(D().P, D().model, 1.0, h, rho, 2.0);
    FAIL() << "expected rejection";
  } catch(const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("(1, 2)"), std::string::npos);
  }
  // Zero coefficients on k = 1 are harmless.
  ScalarSpectrum zero(3);
  zero.set(1, 0, 0.0);
  EXPECT_NO_THROW(assemble_solution(D().P, D().model, 1.0, h, zero, 2.0));
}

TEST(Assembly, RejectsNearEigenvalueGamma) {
  RadialSpectrum h(3);
  ScalarSpectrum rho(3);
  rho.set(2, 0, 1.0);
  double g7 = table().at(7).gamma;
  try {
    assemble_solution(D().P, D().model, g7, h, rho, 2.0, &table());
    FAIL() << "expected rejection";
  } catch(const NearEigenvalueError& e) {
    EXPECT_EQ(e.j(), 7);
  }
}

TEST(Assembly, NormInequalityWithOneConstantAcrossExponents) {
  // Per-mode estimates with constant C give the sequence-norm estimate with 3C
  // for every α, since the three output norms are each bounded by the sum.
  std::mt19937_64 rng(23);
  const double inf = std::numeric_limits<double>::infinity();
  for(int trial = 0; trial < 2; ++trial) {
    RadialSpectrum h(3);
    ScalarSpectrum rho(3);
    for(int k = 0; k <= 20; ++k) {
      if(k == 1) continue;
      int l = int((rng() >> 11) % dim_k(3, k));
      h.set(k, l, RadialFn(D().P.grid, random_smooth(*D().P.grid, rng), 0.0));
      rho.set(k, l, uniform_pm1(rng));
    }
    AssembledSolution A = assemble_solution(D().P, D().model, 1.0, h, rho, 2.0);
    double C = 0;
    for(const auto& [key, phi] : A.u.entries) {
      double y = *A.eta.find(key.first, key.second);
      double lhs = detail::sup_abs(phi) + detail::sup_weighted_derivative(phi) + std::pow(1.0 + key.first, 3) * std::abs(y);
      double in = detail::sup_abs(*h.find(key.first, key.second)) + std::abs(*rho.find(key.first, key.second));
      C = std::max(C, lhs / in);
    }
    for(double alpha : {1.0, 2.0, inf}) {
      double out = norm(A.u, NormSpace::X1, alpha) + norm(A.eta, NormSpace::Y3, alpha);
      double in = norm(h, NormSpace::X, alpha) + norm(rho, NormSpace::Y, alpha);
      EXPECT_LE(out, 3 * C * in) << "alpha=" << alpha;
    }
    EXPECT_LE(A.residual_max, 1e-8);
  }
}

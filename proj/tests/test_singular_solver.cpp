#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <fbspec/checks.hpp>
#include <fbspec/singular_solver.hpp>

#include "common.hpp"

using namespace fbspec;

namespace {

const StationaryProfile& profile() { return fixtures::defaults().P; }

double gk(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 8, 1e-12);
}

// Profile interpolants are smooth only within a panel, so the reference
// integrals are split at panel boundaries (in r, or in ln r when log_var).
double gk_panels(const StationaryProfile& P, const std::function<double(double)>& f, double a, double b,
                 bool log_var = false) {
  std::vector<double> cuts{a};
  for(const Panel& p : P.grid->panels) {
    double c = log_var ? std::log(p.b) : p.b;
    if(c > a && c < b) cuts.push_back(c);
  }
  cuts.push_back(b);
  double sum = 0;
  for(size_t i = 0; i + 1 < cuts.size(); ++i) sum += gk(f, cuts[i], cuts[i + 1]);
  return sum;
}

RadialFn nonnegative_random(const StationaryProfile& P, std::mt19937_64& rng) {
  Vec h = random_smooth(*P.grid, rng);
  return RadialFn(P.grid, h.array().square().matrix(), 0.0);
}

}  // namespace

TEST(Weight, UnitAtReferencePoint) {
  const StationaryProfile& P = profile();
  for(double x : {0.1, 0.5, 0.9}) {
    WeightFn W = compute_weight(P, x * P.R);
    EXPECT_NEAR(W.W(x * P.R), 1.0, 1e-10);
  }
  EXPECT_THROW(compute_weight(P, 0.0), InputError);
  EXPECT_THROW(compute_weight(P, P.R), InputError);
}

TEST(Weight, EndpointPowerLaws) {
  const StationaryProfile& P = profile();
  const Grid& G = *P.grid;
  WeightFn W = compute_weight(P, 0.5 * P.R);
  EXPECT_GT(W.C0, 0.0);
  EXPECT_GT(W.C1, 0.0);
  EXPECT_TRUE(std::isfinite(W.C0) && std::isfinite(W.C1));
  EXPECT_GT(W.bound_lo, 0.0);
  EXPECT_TRUE(std::isfinite(W.bound_hi));
  // W r^α₀ → C0 at the center, W (R−r)^−α₁ → C1 at the outer end.
  double c_in = W.W.F[0] * std::pow(P.R, P.alpha0);
  EXPECT_NEAR(c_in / W.C0, 1.0, 1e-6);
  const int N = G.size();
  double c_out = W.W.node(N - 1) / std::pow(G.s[N - 1], P.alpha1);
  EXPECT_NEAR(c_out / W.C1, 1.0, 1e-3);
}

TEST(InverseTransport, ConstantsAreReproduced) {
  const StationaryProfile& P = profile();
  ModeOperators ops(P, 3);
  RadialFn h(P.grid, 2.5 * P.f_p.F, 0.0);
  RadialFn phi = apply_B(ops, h);
  EXPECT_LE((phi.F.array() - 2.5).abs().maxCoeff(), 1e-8);
  EXPECT_NEAR(phi.at_R(), 2.5, 1e-8);
}

TEST(InverseTransport, ZeroMapsToZero) {
  const StationaryProfile& P = profile();
  ModeOperators ops(P, 2);
  RadialFn z(P.grid, Vec::Zero(P.grid->size()), 0.0);
  EXPECT_EQ(apply_B(ops, z).F.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(apply_Kk(ops, z).F.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(apply_Jk(ops, z), 0.0);
  EXPECT_EQ(solve_Lk0(ops, z).phi.F.cwiseAbs().maxCoeff(), 0.0);
  LkSolution s = solve_Lk(ops, z);
  EXPECT_EQ(s.phi.F.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.nu, 0.0);
}

TEST(InverseTransport, HolderDataKeepsCenterPower) {
  // For h = (r/R)^μ with μ < α₀, Bh / (r/R)^μ → 1 / (v′(0)(α₀ − μ)) at the center.
  const StationaryProfile& P = profile();
  const Grid& G = *P.grid;
  ModeOperators ops(P, 2);
  double mu = 0.5 * P.alpha0;
  RadialFn h(P.grid, node_power(G, mu), 0.0);
  RadialFn phi = apply_B(ops, h);
  double dv0 = G.left_limit(P.w);
  double limit = 1.0 / (dv0 * (P.alpha0 - mu));
  EXPECT_NEAR(phi.F[0] / h.F[0] / limit, 1.0, 1e-2);
  double worst = 0;
  for(int i = 0; i < G.size(); ++i) worst = std::max(worst, std::abs(phi.F[i] / h.F[i]));
  EXPECT_TRUE(std::isfinite(worst));
}

TEST(Lk0, NonnegativeDataGiveNonpositiveSolutions) {
  const StationaryProfile& P = profile();
  std::mt19937_64 rng(20240611);
  for(int k : {2, 5, 11}) {
    ModeOperators ops(P, k);
    Lk0Solver S(ops);
    for(int t = 0; t < 20; ++t) {
      RadialFn h = nonnegative_random(P, rng);
      Lk0Solution s = S.solve(h);
      EXPECT_LE(s.phi.F.maxCoeff(), 0.0) << "k=" << k << " trial " << t;
      EXPECT_LE(s.residual, 1e-12);
      EXPECT_LE(s.boundary_error, 1e-8);
    }
  }
}

TEST(Lk0, CorrectionModeSignAndBoundary) {
  const StationaryProfile& P = profile();
  for(int k : {2, 5, 20, 40}) {
    ModeOperators ops(P, k);
    Lk0Solver S(ops);
    RadialFn e(P.grid, ops.e_k_scaled(), S.scale());
    RadialFn phik = S.solve(e).phi;
    EXPECT_LE(std::abs(phik.at_R()), 1e-10) << "k=" << k;
    EXPECT_LT(phik.F.maxCoeff(), 0.0) << "k=" << k;
  }
}

TEST(Lk0, PointwiseResidualOnRefinedGrid) {
  const StationaryProfile& P = profile();
  StationaryProfile Q = refined(P);
  std::mt19937_64 rng(5);
  for(int k : {2, 7}) {
    ModeOperators ops(P, k), fine(Q, k);
    RadialFn h(P.grid, random_smooth(*P.grid, rng), 0.0);
    Lk0Solution s = solve_Lk0(ops, h);
    EXPECT_LE(Lk0Solver::pointwise_residual(fine, s.phi, h), 1e-8) << "k=" << k;
  }
}

TEST(Lk, DenominatorExceedsOne) {
  const StationaryProfile& P = profile();
  std::mt19937_64 rng(9);
  for(int k : {2, 4, 30}) {
    ModeOperators ops(P, k);
    RadialFn h(P.grid, random_smooth(*P.grid, rng), 0.0);
    LkSolution s = solve_Lk(ops, h);
    EXPECT_GT(s.denominator, 1.0);
    Lk0Solver S(ops);
    RadialFn a(P.grid, s.phik.F.cwiseAbs(), S.scale());
    EXPECT_NEAR(s.denominator, 1.0 + S.J(a), 1e-12);
  }
}

TEST(Lk, DecompositionSolvesModifiedEquation) {
  // φ = ψ + νφ_k satisfies L̃⁰φ − e_k J(φ) = h at the nodes.
  const StationaryProfile& P = profile();
  std::mt19937_64 rng(21);
  for(int k : {3, 8}) {
    ModeOperators ops(P, k);
    Lk0Solver S(ops);
    RadialFn h(P.grid, random_smooth(*P.grid, rng), 0.0);
    LkSolution s = solve_Lk(S, ops, h);
    EXPECT_NEAR(S.J(s.phi), s.nu, 1e-10 * std::max(1.0, std::abs(s.nu)));
  }
}

TEST(Flux, UnitFunctionAgainstAdaptiveQuadrature) {
  const StationaryProfile& P = profile();
  for(int k : {0, 2, 9}) {
    ModeOperators ops(P, k);
    RadialFn one(P.grid, Vec::Ones(P.grid->size()), 0.0);
    double J = apply_Jk(ops, one);
    double ref = gk_panels(P, [&](double r) { return std::pow(r / P.R, P.n + k - 1) * P.g_p(r); }, 0.0, P.R);
    EXPECT_NEAR(J / ref, 1.0, 1e-8) << "k=" << k;
  }
}

TEST(Kernel, TermByTermReevaluation) {
  // −vφ′ + f_pφ + K_kφ against its defining integrals, evaluated by adaptive quadrature.
  const StationaryProfile& P = profile();
  const Grid& G = *P.grid;
  const int n = P.n;
  auto phi = [&](double r) { return std::cos(r / P.R) + r / P.R; };
  auto dphi = [&](double r) { return (1 - std::sin(r / P.R)) / P.R; };
  Vec Phi(G.size());
  for(int i = 0; i < G.size(); ++i) Phi[i] = phi(G.r[i]);
  for(int k : {2, 6}) {
    ModeOperators ops(P, k);
    const double th = ops.theta();
    Vec Lt = ops.L(Phi, 0.0) + ops.K(0.0) * Phi;
    double full = gk_panels(P, [&](double p) { return std::pow(p / P.R, n + k - 1) * P.g_p(p) * phi(p); }, 0, P.R);
    double scale = Lt.cwiseAbs().maxCoeff();
    for(int i = 40; i < G.size(); i += 47) {
      double r = G.r[i];
      // ρ = e^t: the up kernel spans many decades when r is near the center.
      double up = gk_panels(P, [&](double t) {
        double p = std::exp(t);
        return std::pow(r / p, k - 1) * P.g_p(p) * phi(p) * p;
      }, std::log(r), std::log(P.R), true);
      double down = gk_panels(P, [&](double p) { return std::pow(p / r, n + k - 1) * P.g_p(p) * phi(p); }, 0, r);
      double dp = P.dp.node(i);
      double ref = -P.v.node(i) * dphi(r) + P.f_p.node(i) * phi(r) +
                   dp * (th * up + (1 - th) * std::pow(r / P.R, k - 1) * full - (1 - th) * down);
      EXPECT_NEAR(Lt[i], ref, 1e-10 * scale) << "k=" << k << " node " << i;
    }
  }
}

TEST(Kernel, OutputDecaysAtCenter) {
  const StationaryProfile& P = profile();
  const Grid& G = *P.grid;
  ModeOperators ops(P, 4);
  RadialFn one(P.grid, Vec::Ones(G.size()), 0.0);
  RadialFn K = apply_Kk(ops, one);
  // |Kφ| ≤ C (r/R)^{1+σ} near the center with a measured C.
  double C = 0;
  for(int i = 0; i < G.size() && G.r[i] < 0.01 * P.R; ++i) {
    C = std::max(C, std::abs(K.F[i]) / std::pow(G.r[i] / P.R, 1 + P.sigma_exp));
  }
  EXPECT_TRUE(std::isfinite(C));
  EXPECT_LE(std::abs(K.F[0]), 1e-6 * K.F.cwiseAbs().maxCoeff());
}

TEST(Fredholm, RequiresModeAtLeastTwoForLk0) {
  const StationaryProfile& P = profile();
  ModeOperators ops(P, 1);
  EXPECT_THROW(Lk0Solver{ops}, InputError);
  EXPECT_THROW(ModeOperators(P, -1), InputError);
}

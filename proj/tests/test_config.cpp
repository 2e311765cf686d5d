#include <cmath>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include <fbspec/config.hpp>

using namespace fbspec;

namespace {

std::string field_of(const std::string& ini) {
  try {
    parse_config_string(ini);
  } catch(const ConfigError& e) {
    return e.field;
  }
  return "";
}

}  // namespace

TEST(Config, EmptyFileGivesDefaults) {
  RunConfig c = parse_config_string("");
  EXPECT_EQ(c.family, "linear");
  EXPECT_EQ(c.n, 3);
  EXPECT_EQ(c.grid_nodes, 512);
  EXPECT_EQ(c.k_max, 60);
  EXPECT_EQ(c.rates.mu_D, 0.5);
  ASSERT_EQ(c.gammas.size(), 1u);
  EXPECT_EQ(c.gammas[0], 1.0);
}

TEST(Config, ParsesEverySection) {
  RunConfig c = parse_config_string(
      "[model]\nlambda = 2\nb = 1.5\np = 0.7\nmu_D = 0.25\nmu_Q = 0.3\n"
      "[problem]\nn = 4\n"
      "[tolerances]\nshooting = 1e-9\nquadrature = 1e-11\nintegral_equation = 1e-14\n"
      "[grid]\nnodes = 256\norder = 12\n"
      "[spectrum]\nk_max = 12\n"
      "[resolvent]\ngamma = 0.5, 2.5\nalpha = inf\ninput = in.json\nratio_samples = 7\n"
      "[run]\noutput_dir = results\nworkers = 3\nseed = 42\n"
      "[stationary]\ngamma_ref = 2\n");
  EXPECT_EQ(c.rates.lambda, 2);
  EXPECT_EQ(c.rates.mu_Q, 0.3);
  EXPECT_EQ(c.n, 4);
  EXPECT_EQ(c.tol_integral, 1e-14);
  EXPECT_EQ(c.grid_order, 12);
  EXPECT_EQ(c.k_max, 12);
  ASSERT_EQ(c.gammas.size(), 2u);
  EXPECT_EQ(c.gammas[1], 2.5);
  EXPECT_TRUE(std::isinf(c.norm_alpha));
  EXPECT_EQ(c.resolvent_input, "in.json");
  EXPECT_EQ(c.ratio_samples, 7);
  EXPECT_EQ(c.output_dir, "results");
  EXPECT_EQ(c.workers, 3);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.gamma_ref, 2);
}

TEST(Config, ShippedDefaultFileMatchesBuiltInDefaults) {
  std::ifstream in(std::string(FBSPEC_SOURCE_DIR) + "/configs/default.ini");
  ASSERT_TRUE(in.good());
  RunConfig a = parse_config(in), b;
  EXPECT_EQ(to_json(a), to_json(b));
}

TEST(Config, NegativeToleranceNamesField) {
  EXPECT_EQ(field_of("[tolerances]\nshooting = -1e-8\n"), "tolerances.shooting");
  EXPECT_EQ(field_of("[tolerances]\nquadrature = 0\n"), "tolerances.quadrature");
  EXPECT_EQ(field_of("[tolerances]\nintegral_equation = -1\n"), "tolerances.integral_equation");
}

TEST(Config, InvariantViolationsNameField) {
  EXPECT_EQ(field_of("[spectrum]\nk_max = 2\n"), "spectrum.k_max");
  EXPECT_EQ(field_of("[problem]\nn = 1\n"), "problem.n");
  EXPECT_EQ(field_of("[model]\nb = 0.4\n"), "model.b");
  EXPECT_EQ(field_of("[model]\nfamily = hill\n"), "model.family");
  EXPECT_EQ(field_of("[run]\nworkers = 0\n"), "run.workers");
  EXPECT_EQ(field_of("[resolvent]\nalpha = 0.5\n"), "resolvent.alpha");
  EXPECT_EQ(field_of("[resolvent]\ngamma = \n"), "resolvent.gamma");
}

TEST(Config, MalformedValuesNameField) {
  EXPECT_EQ(field_of("[grid]\nnodes = many\n"), "grid.nodes");
  EXPECT_EQ(field_of("[grid]\nnodes = 512x\n"), "grid.nodes");
  EXPECT_EQ(field_of("[resolvent]\ngamma = 1, two\n"), "resolvent.gamma");
  EXPECT_EQ(field_of("[grid]\nspacing = 3\n"), "grid.spacing");
}

TEST(Config, ManifestJsonEchoesConfig) {
  RunConfig c;
  c.norm_alpha = std::numeric_limits<double>::infinity();
  nlohmann::json j = to_json(c);
  EXPECT_EQ(j["resolvent"]["alpha"], "inf");
  EXPECT_EQ(j["grid"]["nodes"], 512);
  EXPECT_EQ(j["run"]["seed"], c.seed);
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "rate_model.hpp"

namespace fbspec {

inline constexpr const char* kVersion = "1.0.0";

// Configuration problems, reported with the offending field.
struct ConfigError : InputError {
  std::string field;
  ConfigError(std::string f, const std::string& msg) : InputError(f + ": " + msg), field(std::move(f)) {}
};

struct RunConfig {
  std::string family = "linear";
  LinearRates rates;
  int n = 3;
  double tol_shooting = 1e-10;         // stationary Newton and ODE tolerance
  double tol_quadrature = 1e-12;       // diffusion-mode ODEs and oracle quadratures
  double tol_integral = 1e-15;         // Neumann stopping increment
  int grid_nodes = 512;
  int grid_order = 15;
  int k_max = 60;
  std::vector<double> gammas{1.0};     // resolvent γ values
  double norm_alpha = 2.0;             // ℓ^α exponent of the coefficient norms (inf allowed)
  std::string resolvent_input;         // JSON input of the resolvent command
  std::string output_dir = "out";
  int workers = 1;
  std::uint64_t seed = 20240611;
  double gamma_ref = 1.0;              // only enters ϖ_s
  int ratio_samples = 50;              // randomized inputs per mode in the estimate check
};

inline void validate(const RunConfig& c) {
  auto positive = [](const std::string& f, double v) {
    if(!(v > 0)) throw ConfigError(f, "must be > 0");
  };
  if(c.family != "linear") throw ConfigError("model.family", "unknown family '" + c.family + "'");
  positive("model.lambda", c.rates.lambda);
  positive("model.b", c.rates.b);
  positive("model.p", c.rates.p);
  positive("model.mu_D", c.rates.mu_D);
  positive("model.mu_Q", c.rates.mu_Q);
  if(!(c.rates.b > c.rates.mu_D)) throw ConfigError("model.b", "must exceed model.mu_D");
  if(c.n < 2) throw ConfigError("problem.n", "must be >= 2");
  positive("tolerances.shooting", c.tol_shooting);
  positive("tolerances.quadrature", c.tol_quadrature);
  positive("tolerances.integral_equation", c.tol_integral);
  if(c.grid_nodes < 64) throw ConfigError("grid.nodes", "must be >= 64");
  if(c.grid_order < 8 || c.grid_order > 20) throw ConfigError("grid.order", "must lie in [8, 20]");
  if(c.k_max < 3) throw ConfigError("spectrum.k_max", "must be >= 3");
  if(c.gammas.empty()) throw ConfigError("resolvent.gamma", "needs at least one value");
  if(!(c.norm_alpha >= 1)) throw ConfigError("resolvent.alpha", "must lie in [1, inf]");
  if(c.workers < 1) throw ConfigError("run.workers", "must be >= 1");
  if(c.ratio_samples < 1) throw ConfigError("resolvent.ratio_samples", "must be >= 1");
  positive("stationary.gamma_ref", c.gamma_ref);
}

namespace detail {

template <class T>
T get_field(const boost::property_tree::ptree& pt, const std::string& key, T fallback) {
  auto v = pt.get_optional<std::string>(key);
  if(!v) return fallback;
  std::istringstream is(*v);
  T out{};
  is >> out;
  if(is.fail()) throw ConfigError(key, "cannot parse '" + *v + "'");
  std::string rest;
  is >> rest;
  if(!rest.empty()) throw ConfigError(key, "trailing characters in '" + *v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& s) {
  if(s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch(const std::exception&) {
    throw ConfigError(key, "cannot parse '" + s + "'");
  }
  if(pos != s.size()) throw ConfigError(key, "cannot parse '" + s + "'");
  return v;
}

}  // namespace detail

// Flat INI: [model] [problem] [tolerances] [grid] [spectrum] [resolvent] [run] [stationary].
inline RunConfig parse_config(std::istream& in) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch(const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("file", e.message() + " at line " + std::to_string(e.line()));
  }
  static const std::vector<std::string> known{
      "model.family", "model.lambda", "model.b", "model.p", "model.mu_D", "model.mu_Q", "problem.n",
      "tolerances.shooting", "tolerances.quadrature", "tolerances.integral_equation", "grid.nodes", "grid.order",
      "spectrum.k_max", "resolvent.gamma", "resolvent.alpha", "resolvent.input", "resolvent.ratio_samples",
      "run.output_dir", "run.workers", "run.seed", "stationary.gamma_ref"};
  for(const auto& sec : pt) {
    for(const auto& kv : sec.second) {
      std::string key = sec.first + "." + kv.first;
      if(std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError(key, "unknown field");
    }
  }
  RunConfig c;
  using detail::get_field;
  c.family = pt.get("model.family", c.family);
  c.rates.lambda = get_field(pt, "model.lambda", c.rates.lambda);
  c.rates.b = get_field(pt, "model.b", c.rates.b);
  c.rates.p = get_field(pt, "model.p", c.rates.p);
  c.rates.mu_D = get_field(pt, "model.mu_D", c.rates.mu_D);
  c.rates.mu_Q = get_field(pt, "model.mu_Q", c.rates.mu_Q);
  c.n = get_field(pt, "problem.n", c.n);
  c.tol_shooting = get_field(pt, "tolerances.shooting", c.tol_shooting);
  c.tol_quadrature = get_field(pt, "tolerances.quadrature", c.tol_quadrature);
  c.tol_integral = get_field(pt, "tolerances.integral_equation", c.tol_integral);
  c.grid_nodes = get_field(pt, "grid.nodes", c.grid_nodes);
  c.grid_order = get_field(pt, "grid.order", c.grid_order);
  c.k_max = get_field(pt, "spectrum.k_max", c.k_max);
  if(auto g = pt.get_optional<std::string>("resolvent.gamma")) {
    c.gammas.clear();
    std::stringstream ss(*g);
    std::string item;
    while(std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if(!item.empty()) c.gammas.push_back(detail::parse_real("resolvent.gamma", item));
    }
  }
  if(auto a = pt.get_optional<std::string>("resolvent.alpha")) c.norm_alpha = detail::parse_real("resolvent.alpha", *a);
  c.resolvent_input = pt.get("resolvent.input", c.resolvent_input);
  c.ratio_samples = get_field(pt, "resolvent.ratio_samples", c.ratio_samples);
  c.output_dir = pt.get("run.output_dir", c.output_dir);
  c.workers = get_field(pt, "run.workers", c.workers);
  c.seed = get_field(pt, "run.seed", c.seed);
  c.gamma_ref = get_field(pt, "stationary.gamma_ref", c.gamma_ref);
  validate(c);
  return c;
}

inline RunConfig parse_config_string(const std::string& s) {
  std::istringstream in(s);
  return parse_config(in);
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["model"] = {{"family", c.family}, {"lambda", c.rates.lambda}, {"b", c.rates.b}, {"p", c.rates.p},
                {"mu_D", c.rates.mu_D}, {"mu_Q", c.rates.mu_Q}};
  j["problem"] = {{"n", c.n}};
  j["tolerances"] = {{"shooting", c.tol_shooting}, {"quadrature", c.tol_quadrature},
                     {"integral_equation", c.tol_integral}};
  j["grid"] = {{"nodes", c.grid_nodes}, {"order", c.grid_order}};
  j["spectrum"] = {{"k_max", c.k_max}};
  j["resolvent"] = {{"gamma", c.gammas},
                    {"alpha", std::isinf(c.norm_alpha) ? nlohmann::json("inf") : nlohmann::json(c.norm_alpha)},
                    {"input", c.resolvent_input},
                    {"ratio_samples", c.ratio_samples}};
  j["run"] = {{"output_dir", c.output_dir}, {"workers", c.workers}, {"seed", c.seed}};
  j["stationary"] = {{"gamma_ref", c.gamma_ref}};
  return j;
}

}  // namespace fbspec

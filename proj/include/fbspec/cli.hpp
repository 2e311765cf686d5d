#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "checks.hpp"
#include "config.hpp"
#include "parallel.hpp"

namespace fbspec::cli {

enum ExitCode : int { kOk = 0, kNumerical = 1, kConfig = 2 };

inline std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

// JSON numbers cannot be inf or nan; those become strings.
inline nlohmann::json jnum(double x) {
  if(std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

class CsvWriter {
public:
  explicit CsvWriter(const std::vector<std::string>& header) {
    for(size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    for(size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }
  std::string str() const { return out_.str(); }

private:
  std::ostringstream out_;
};

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if(!f) throw InputError("cannot write " + p.string());
  f << s;
}

inline nlohmann::json manifest(const std::string& command, const RunConfig& cfg) {
  return {{"command", command}, {"code_version", kVersion}, {"config", to_json(cfg)}};
}

inline StationaryProfile stationary_from(const RunConfig& cfg) {
  RateModel m(cfg.rates);
  StationaryOptions opt;
  opt.grid_nodes = cfg.grid_nodes;
  opt.grid_order = cfg.grid_order;
  opt.gamma_ref = cfg.gamma_ref;
  return solve_stationary(m, cfg.n, cfg.tol_shooting, opt);
}

inline nlohmann::json stationary_summary(const StationaryProfile& P) {
  return {{"R_s", P.R},
          {"sigma0", P.sigma0},
          {"p0", P.p0},
          {"alpha0", P.alpha0},
          {"alpha1", P.alpha1},
          {"sigma_exp", P.sigma_exp},
          {"c0", P.c0},
          {"residual_max", P.residual_max},
          {"g11", P.g11},
          {"sigma_prime_R", P.dsigma_R}};
}

inline ResolventOptions resolvent_options(const RunConfig& cfg) {
  ResolventOptions o;
  o.neumann_tol = cfg.tol_integral;
  return o;
}

// One line of the verify report.
struct Check {
  std::string name;
  double value = 0;
  double threshold = 0;
  bool pass = false;
};

inline int cmd_stationary(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  StationaryProfile P = stationary_from(cfg);
  ProfileReport rep = check_profile_properties(P);
  CsvWriter csv({"r", "sigma", "sigma_prime", "p", "p_prime", "v", "v_prime", "pi"});
  Vec r = P.grid->abscissae();
  Vec s = P.sigma.full(), ds = P.dsigma.full(), p = P.p.full(), dp = P.dp.full(), v = P.v.full(), dv = P.dv.full(),
      pi = P.pi.full();
  for(int i = 0; i < r.size(); ++i) {
    csv.row({num(r[i]), num(s[i]), num(ds[i]), num(p[i]), num(dp[i]), num(v[i]), num(dv[i]), num(pi[i])});
  }
  write_file(dir / "stationary.csv", csv.str());
  nlohmann::json j = manifest("stationary", cfg);
  j["summary"] = stationary_summary(P);
  j["properties"] = {{"ok", rep.ok},          {"failures", rep.failures}, {"c1", rep.c1},
                     {"c2", rep.c2},          {"dv_R_rel", rep.dv_R_rel}, {"dp_R_rel", rep.dp_R_rel},
                     {"v0", rep.v0},          {"vR", rep.vR}};
  write_file(dir / "stationary.json", j.dump(2) + "\n");
  log << "stationary: R_s = " << num(P.R) << ", residual " << num(P.residual_max) << "\n";
  return rep.ok ? kOk : kNumerical;
}

inline int cmd_modes(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  StationaryProfile P = stationary_from(cfg);
  RateModel m(cfg.rates);
  WorkerPool pool(cfg.workers);
  std::vector<ModeDiffusion> modes =
      pool(cfg.k_max + 1, [&](int k) { return solve_uk(P, m, k, cfg.tol_quadrature); });
  std::vector<std::string> header{"r"};
  for(int k = 0; k <= cfg.k_max; ++k) header.push_back("u_" + std::to_string(k));
  CsvWriter csv(header);
  Vec r = P.grid->abscissae();
  std::vector<Vec> full;
  for(const auto& md : modes) full.push_back(md.u.full());
  for(int i = 0; i < r.size(); ++i) {
    std::vector<std::string> row{num(r[i])};
    for(const auto& f : full) row.push_back(num(f[i]));
    csv.row(row);
  }
  write_file(dir / "modes.csv", csv.str());
  DiffusionReport rep = check_diffusion_modes(P, modes);
  double u1 = u1_oracle_error(P, modes[1]);
  nlohmann::json j = manifest("modes", cfg);
  j["summary"] = {{"bounds_ok", rep.ok}, {"failures", rep.failures}, {"bound_constant", rep.C},
                  {"u_min", rep.u_min},  {"u1_oracle_error", u1}};
  write_file(dir / "modes.json", j.dump(2) + "\n");
  log << "modes: u1 oracle error " << num(u1) << ", bounds " << (rep.ok ? "ok" : "violated") << "\n";
  return rep.ok ? kOk : kNumerical;
}

inline nlohmann::json spectrum_summary(const SpectrumResult& S) {
  return {{"C_n_closed", S.C_n_closed},
          {"C_n_fit", S.C_n_fit},
          {"fit_slope", S.c_fit},
          {"fit_k_from", S.fit_k_lo},
          {"k_star_monotone", S.k_star},
          {"multiplicity_classes", S.multiplicity_classes},
          {"asymptotic_ratio_max", S.asymptotic_ratio},
          {"k_nu_tilde_max", S.k_nu_max},
          {"k_J_abs_psi_tilde_max", S.k_J_psi_tilde_max}};
}

inline std::string spectrum_csv(const SpectrumResult& S) {
  CsvWriter csv({"k", "lambda_k", "gamma_k", "k3_gamma_k", "nu_tilde_k", "Jk_abs_phik", "residual"});
  for(const auto& e : S.entries) {
    csv.row({std::to_string(e.k), num(e.lambda), num(e.gamma), num(std::pow(double(e.k), 3) * e.gamma),
             num(e.nu_tilde), num(e.J_abs_phik), num(std::max(e.residual, e.pointwise))});
  }
  return csv.str();
}

inline int cmd_spectrum(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  StationaryProfile P = stationary_from(cfg);
  RateModel m(cfg.rates);
  SpectrumResult S = compute_spectrum(P, m, cfg.k_max, WorkerPool(cfg.workers));
  write_file(dir / "spectrum.csv", spectrum_csv(S));
  nlohmann::json j = manifest("spectrum", cfg);
  j["summary"] = spectrum_summary(S);
  j["stationary"] = stationary_summary(P);
  write_file(dir / "spectrum.json", j.dump(2) + "\n");
  log << "spectrum: C_n closed " << num(S.C_n_closed) << ", fit " << num(S.C_n_fit) << ", k* " << S.k_star << "\n";
  return kOk;
}

// ζ given as samples on x = r/R ∈ [0, 1] (equispaced unless zeta_x is given),
// extended to the grid by linear interpolation.
inline RadialFn zeta_from_samples(const StationaryProfile& P, const nlohmann::json& mode) {
  std::vector<double> vals = mode.at("zeta_samples").get<std::vector<double>>();
  if(vals.size() < 2) throw InputError("resolvent input: zeta_samples needs at least two values");
  std::vector<double> xs;
  if(mode.contains("zeta_x")) {
    xs = mode.at("zeta_x").get<std::vector<double>>();
    if(xs.size() != vals.size()) throw InputError("resolvent input: zeta_x and zeta_samples differ in length");
    if(xs.front() != 0.0 || xs.back() != 1.0) throw InputError("resolvent input: zeta_x must span [0, 1]");
    for(size_t i = 1; i < xs.size(); ++i) {
      if(!(xs[i] > xs[i - 1])) throw InputError("resolvent input: zeta_x must be increasing");
    }
  } else {
    for(size_t i = 0; i < vals.size(); ++i) xs.push_back(double(i) / double(vals.size() - 1));
  }
  const Grid& G = *P.grid;
  Vec F(G.size());
  for(int i = 0; i < G.size(); ++i) {
    double x = G.r[i] / P.R;
    size_t j = std::upper_bound(xs.begin(), xs.end(), x) - xs.begin();
    j = std::clamp<size_t>(j, 1, xs.size() - 1);
    double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    F[i] = (1 - t) * vals[j - 1] + t * vals[j];
  }
  return RadialFn(P.grid, F, 0.0);
}

inline int cmd_resolvent(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  if(cfg.resolvent_input.empty()) throw ConfigError("resolvent.input", "required for the resolvent command");
  std::ifstream in(cfg.resolvent_input);
  if(!in) throw ConfigError("resolvent.input", "cannot open '" + cfg.resolvent_input + "'");
  nlohmann::json input;
  try {
    in >> input;
  } catch(const nlohmann::json::exception& e) {
    throw ConfigError("resolvent.input", std::string("malformed JSON: ") + e.what());
  }
  StationaryProfile P = stationary_from(cfg);
  RateModel m(cfg.rates);
  WorkerPool pool(cfg.workers);
  SpectrumResult S = compute_spectrum(P, m, cfg.k_max, pool);
  double gamma = input.at("gamma").get<double>();
  double alpha = cfg.norm_alpha;
  if(input.contains("alpha")) {
    alpha = input["alpha"].is_string() ? detail::parse_real("alpha", input["alpha"].get<std::string>())
                                        : input["alpha"].get<double>();
  }
  RadialSpectrum h(P.n);
  ScalarSpectrum rho(P.n);
  for(const auto& md : input.at("modes")) {
    int k = md.at("k").get<int>(), l = md.at("l").get<int>();
    h.set(k, l, zeta_from_samples(P, md));
    rho.set(k, l, md.value("z", 0.0));
  }
  AssembledSolution A = assemble_solution(P, m, gamma, h, rho, alpha, &S, resolvent_options(cfg), pool);
  CsvWriter csv({"k", "l", "y", "sup_phi", "sup_weighted_derivative", "residual"});
  nlohmann::json modes = nlohmann::json::array();
  for(const auto& [key, phi] : A.u.entries) {
    double y = *A.eta.find(key.first, key.second);
    double sup_phi = detail::sup_abs(phi), sup_wd = detail::sup_weighted_derivative(phi);
    csv.row({std::to_string(key.first), std::to_string(key.second), num(y), num(sup_phi), num(sup_wd), num(A.residuals.at(key))});
    Vec v = phi.full();
    modes.push_back({{"k", key.first}, {"l", key.second}, {"y", y},
                     {"phi", std::vector<double>(v.data(), v.data() + v.size())}});
  }
  write_file(dir / "resolvent.csv", csv.str());
  nlohmann::json j = manifest("resolvent", cfg);
  Vec r = P.grid->abscissae();
  j["input"] = input;
  j["r"] = std::vector<double>(r.data(), r.data() + r.size());
  j["modes"] = modes;
  j["norms"] = {{"alpha", jnum(alpha)},
                {"input_norm", A.norm_in},
                {"output_norm", A.norm_out},
                {"ratio", A.ratio},
                {"residual_max", A.residual_max}};
  write_file(dir / "resolvent.json", j.dump(2) + "\n");
  log << "resolvent: ratio " << num(A.ratio) << ", residual " << num(A.residual_max) << "\n";
  return kOk;
}

// The invariant suite. Every check has a pinned threshold; any failure
// makes the command exit with kNumerical.
inline std::vector<Check> verify_suite(const RunConfig& cfg, std::ostream& log) {
  std::vector<Check> out;
  auto add = [&](const std::string& name, double value, double thr, bool pass) {
    out.push_back({name, value, thr, pass});
    log << (pass ? "PASS " : "FAIL ") << name << " = " << num(value) << " (threshold " << num(thr) << ")\n";
  };
  auto le = [&](const std::string& name, double value, double thr) { add(name, value, thr, value <= thr); };
  RateModel m(cfg.rates);
  WorkerPool pool(cfg.workers);
  ValidationReport vr = validate_model(m, 101);
  add("model_valid", vr.max_partial_rel_error, 1e-6, vr.ok && vr.max_partial_rel_error <= 1e-6);

  StationaryProfile P = stationary_from(cfg);
  ProfileReport pr = check_profile_properties(P);
  le("stationary_residual", P.residual_max, 1e-8);
  add("stationary_properties", double(pr.failures.size()), 0, pr.ok);
  le("stationary_dv_R", pr.dv_R_rel, 1e-6);

  const int kmodes = std::max(cfg.k_max, 40);
  std::vector<ModeDiffusion> modes =
      pool(kmodes + 1, [&](int k) { return solve_uk(P, m, k, cfg.tol_quadrature); });
  le("diffusion_u1_oracle", u1_oracle_error(P, modes[1]), 1e-6);
  std::vector<ModeDiffusion> first(modes.begin(), modes.begin() + 41);
  DiffusionReport dr = check_diffusion_modes(P, first);
  add("diffusion_bounds_k_le_40", dr.C, 0, dr.ok && std::isfinite(dr.C));

  Mode1Report m1 = verify_mode1(P, modes[1]);
  le("mode1_psi", m1.psi_error, 1e-5);
  le("mode1_J", m1.J_error, 1e-6);
  Mode0Report m0 = verify_mode0(P, modes[0], {0.0, 7.0});
  double ratio0 = m0.sigma_min[0] / m0.norm[0];
  add("mode0_kernel", ratio0, 1e-6, m0.ok);
  le("mode0_gamma_independent", m0.gamma_spread, 0);

  SpectrumResult S;
  S.n = P.n;
  S.k_max = cfg.k_max;
  S.entries = pool(cfg.k_max - 1, [&](int j) { return compute_mode_entry(P, modes[j + 2]); });
  summarize_spectrum(P, S);
  for(int k : {2, 3, 5, 10}) {
    if(k <= cfg.k_max) le("dual_route_k" + std::to_string(k), S.at(k).route_diff, 1e-6);
  }
  double chain = 0, cons = 0, nu = 0, res = 0, bdry = 0;
  bool signs = true;
  for(const auto& e : S.entries) {
    chain = std::max(chain, std::abs(e.gamma_root / e.gamma - 1));
    cons = std::max(cons, e.consistency);
    nu = std::max(nu, std::abs(e.nu_tilde - e.nu_direct));
    res = std::max(res, std::max(e.residual, e.pointwise));
    bdry = std::max(bdry, e.boundary_error);
    if(e.k <= 40 && !(std::abs(e.phik_R) <= 1e-10 && e.phik_max < 0)) signs = false;
  }
  le("gamma_identity_chain", chain, 1e-10);
  le("gamma_consistency", cons, 1e-8);
  le("nu_tilde_reproduces_J_v", nu, 1e-8);
  le("psi_residual", res, 1e-8);
  le("psi_boundary_value", bdry, 1e-8);
  add("phik_sign_k_le_40", 0, 0, signs);
  for(int k : {2, 10, 30}) {
    if(k <= cfg.k_max) {
      const auto& e = S.at(k);
      le("psi_tilde_R_k" + std::to_string(k), std::abs(e.psi_tilde_R - e.psi_tilde_R_closed), 1e-6);
    }
  }
  add("asymptotic_ratio_finite", S.asymptotic_ratio, 0, std::isfinite(S.asymptotic_ratio));
  add("k_star_exists", S.k_star, 0, S.k_star >= 2);
  add("k_nu_tilde_bounded", S.k_nu_max, 0, std::isfinite(S.k_nu_max));
  add("k_J_abs_psi_tilde_bounded", S.k_J_psi_tilde_max, 0, std::isfinite(S.k_J_psi_tilde_max));

  // Resolvent at every configured γ.
  ResolventOptions ro = resolvent_options(cfg);
  for(size_t gi = 0; gi < cfg.gammas.size(); ++gi) {
    double gamma = cfg.gammas[gi];
    std::string tag = "_g" + std::to_string(gi);
    if(!near_eigenvalues(S, gamma, ro.near_tol).empty()) {
      add("resolvent_gamma_admissible" + tag, gamma, 0, false);
      continue;
    }
    std::vector<int> ks{0};
    for(int k = 2; k <= std::min(30, cfg.k_max); ++k) ks.push_back(k);
    struct PerK {
      RatioReport ratio;
      ManufacturedReport manu;
      double agree = 0;
    };
    std::vector<PerK> per = pool(int(ks.size()), [&](int j) {
      int k = ks[j];
      ModeResolvent R(P, modes[k], gamma, &S, ro);
      PerK o;
      o.ratio = estimate_ratios(P, R, cfg.ratio_samples, cfg.seed);
      o.manu = manufactured_check(P, R);
      if(k >= 2) {
        std::mt19937_64 rng(cfg.seed + 17 * k);
        RadialFn zeta(P.grid, random_smooth(*P.grid, rng), 0.0);
        double z = uniform_pm1(rng);
        ModeSolution a = R.solve(zeta, z), b = R.solve_direct(zeta, z);
        o.agree = std::max((a.phi.F - b.phi.F).lpNorm<Eigen::Infinity>() / b.phi.F.lpNorm<Eigen::Infinity>(),
                           std::abs(a.y - b.y) / std::max(std::abs(b.y), 1e-300));
      }
      return o;
    });
    double rmax = 0, manu = 0, agree = 0, rres = 0;
    for(size_t j = 0; j < ks.size(); ++j) {
      rmax = std::max(rmax, per[j].ratio.ratio_max);
      rres = std::max(rres, per[j].ratio.residual_max);
      agree = std::max(agree, per[j].agree);
      int k = ks[j];
      if(k == 0 || k == 2 || k == 7 || k == 20) {
        manu = std::max(manu, std::max(per[j].manu.phi_error, per[j].manu.y_error));
      }
    }
    le("resolvent_manufactured" + tag, manu, 1e-6);
    le("resolvent_route_agreement" + tag, agree, 1e-6);
    le("resolvent_residual" + tag, rres, 1e-8);
    add("resolvent_ratio_bounded" + tag, rmax, 0, std::isfinite(rmax));
  }
  bool k1 = false;
  try {
    ModeResolvent R(P, modes[1], cfg.gammas.front(), &S, ro);
  } catch(const InputError&) {
    k1 = true;
  }
  add("resolvent_rejects_k1", 0, 0, k1);
  int j_named = -1;
  const int jt = std::min(5, cfg.k_max);
  try {
    ModeResolvent R(P, modes[2], S.at(jt).gamma * (1 + 1e-9), &S, ro);
  } catch(const NearEigenvalueError& e) {
    j_named = e.j();
  }
  add("resolvent_rejects_near_eigenvalue", j_named, jt, j_named == jt);
  return out;
}

inline int cmd_verify(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  std::vector<Check> checks = verify_suite(cfg, log);
  bool ok = true;
  CsvWriter csv({"check", "value", "threshold", "pass"});
  nlohmann::json items = nlohmann::json::array();
  for(const auto& c : checks) {
    ok = ok && c.pass;
    csv.row({c.name, num(c.value), num(c.threshold), c.pass ? "1" : "0"});
    items.push_back({{"check", c.name}, {"value", jnum(c.value)}, {"threshold", c.threshold}, {"pass", c.pass}});
  }
  write_file(dir / "verify.csv", csv.str());
  nlohmann::json j = manifest("verify", cfg);
  j["checks"] = items;
  j["ok"] = ok;
  write_file(dir / "verify.json", j.dump(2) + "\n");
  log << "verify: " << (ok ? "all checks passed" : "FAILURES present") << "\n";
  return ok ? kOk : kNumerical;
}

// Runs one command; configuration problems exit with kConfig, numerical
// failures with kNumerical.
inline int run(const std::string& command, const RunConfig& cfg, std::ostream& log = std::cerr) {
  try {
    validate(cfg);
    std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    if(command == "stationary") return cmd_stationary(cfg, dir, log);
    if(command == "modes") return cmd_modes(cfg, dir, log);
    if(command == "spectrum") return cmd_spectrum(cfg, dir, log);
    if(command == "resolvent") return cmd_resolvent(cfg, dir, log);
    if(command == "verify") return cmd_verify(cfg, dir, log);
    log << "unknown command '" << command << "'\n";
    return kConfig;
  } catch(const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kConfig;
  } catch(const NumericalError& e) {
    log << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch(const InputError& e) {
    log << "input error: " << e.what() << "\n";
    return kConfig;
  } catch(const nlohmann::json::exception& e) {
    log << "input error: " << e.what() << "\n";
    return kConfig;
  } catch(const std::exception& e) {
    log << "failure: " << e.what() << "\n";
    return kNumerical;
  }
}

}  // namespace fbspec::cli

#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include <fbspec/cli.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Radial stationary solution, mode spectrum and resolvent of the tumor free boundary model"};
  app.require_subcommand(1);
  std::string config_path, output_dir, input;
  int k_max = -1, workers = -1;
  std::vector<double> gammas;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"stationary", "Solve the radial stationary problem and write its profiles"},
      {"modes", "Solve the diffusion modes u_k for k <= k_max"},
      {"spectrum", "Tabulate the mode eigenvalues gamma_k for 2 <= k <= k_max"},
      {"resolvent", "Solve the resolvent system for a JSON spectrum input"},
      {"verify", "Run the full invariant suite and exit nonzero on any failure"}};
  for(const auto& [name, about] : commands) {
    CLI::App* sub = app.add_subcommand(name, about);
    sub->add_option("-c,--config", config_path, "INI configuration file");
    sub->add_option("-o,--output-dir", output_dir, "Output directory (overrides run.output_dir)");
    sub->add_option("--k-max", k_max, "Largest mode (overrides spectrum.k_max)");
    sub->add_option("--workers", workers, "Worker threads (overrides run.workers)");
    if(name == "resolvent") sub->add_option("-i,--input", input, "JSON input (overrides resolvent.input)");
    if(name == "verify") sub->add_option("--gamma", gammas, "Resolvent gamma values");
  }
  try {
    app.parse(argc, argv);
  } catch(const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : fbspec::cli::kConfig;
  }
  std::string command = app.get_subcommands().front()->get_name();
  fbspec::RunConfig cfg;
  try {
    if(!config_path.empty()) {
      std::ifstream in(config_path);
      if(!in) throw fbspec::ConfigError("--config", "cannot open '" + config_path + "'");
      cfg = fbspec::parse_config(in);
    }
    if(!output_dir.empty()) cfg.output_dir = output_dir;
    if(k_max >= 0) cfg.k_max = k_max;
    if(workers >= 0) cfg.workers = workers;
    if(!input.empty()) cfg.resolvent_input = input;
    if(!gammas.empty()) cfg.gammas = gammas;
    fbspec::validate(cfg);
  } catch(const fbspec::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n" << app.help();
    return fbspec::cli::kConfig;
  }
  return fbspec::cli::run(command, cfg, std::cerr);
}

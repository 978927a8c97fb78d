// Command-line experiment runner. Subcommands: theta-sweep, convergence,
// prompt-compare, dependence, identities. Exit codes: 0 success, 1 check
// failure, 2 config error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "zsl/experiments.hpp"
#include "zsl/io.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  int replicates = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--out", flags.out_path, "output path");
  cmd->add_option("--seed", flags.seed, "base seed")
      ->each([&](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--threads", flags.threads, "worker threads");
  cmd->add_option("--replicates", flags.replicates, "replicate count");
}

zsl::ExperimentConfig load_config(const CommonFlags& flags,
                                  const std::string& default_out) {
  nlohmann::json j = nlohmann::json::object();
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw zsl::ConfigError("cannot open config: " + flags.config_path);
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw zsl::ConfigError(std::string("invalid JSON: ") + e.what());
    }
  }
  zsl::ExperimentConfig cfg = zsl::parse_config(j);
  if (flags.seed_set) cfg.base_seed = flags.seed;
  if (flags.threads > 0) cfg.threads = flags.threads;
  if (flags.replicates > 0) cfg.replicates = flags.replicates;
  if (!flags.out_path.empty())
    cfg.out = flags.out_path;
  else if (cfg.out == "out.csv")
    cfg.out = default_out;
  return cfg;
}

void emit(const zsl::ExperimentConfig& cfg,
          const std::vector<std::string>& header, const zsl::Rows& rows) {
  zsl::write_csv(cfg.out, header, rows);
  zsl::write_sidecar(cfg.out, cfg.dump(), cfg.base_seed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for zero-shot prediction estimators"};
  app.require_subcommand(1);

  CommonFlags f_theta, f_conv, f_prompt, f_dep, f_ident;
  auto* c_theta = app.add_subcommand("theta-sweep",
                                     "predictor accuracy across theta");
  auto* c_conv = app.add_subcommand("convergence", "N/M error sweeps");
  auto* c_prompt = app.add_subcommand("prompt-compare",
                                      "prompting strategies vs m");
  auto* c_dep = app.add_subcommand("dependence", "dependence statistics");
  auto* c_ident = app.add_subcommand("identities", "identity test battery");
  add_common(c_theta, f_theta);
  add_common(c_conv, f_conv);
  add_common(c_prompt, f_prompt);
  add_common(c_dep, f_dep);
  add_common(c_ident, f_ident);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_theta->parsed()) {
      const auto cfg = load_config(f_theta, "theta_sweep.csv");
      emit(cfg, zsl::theta_sweep_header(), zsl::run_theta_sweep(cfg));
    } else if (c_conv->parsed()) {
      const auto cfg = load_config(f_conv, "convergence.csv");
      emit(cfg, zsl::convergence_header(), zsl::run_convergence(cfg));
    } else if (c_prompt->parsed()) {
      const auto cfg = load_config(f_prompt, "prompt_compare.csv");
      emit(cfg, zsl::prompt_compare_header(), zsl::run_prompt_compare(cfg));
    } else if (c_dep->parsed()) {
      const auto cfg = load_config(f_dep, "dependence.csv");
      emit(cfg, zsl::dependence_header(), zsl::run_dependence(cfg));
    } else if (c_ident->parsed()) {
      const auto cfg = load_config(f_ident, "identities.json");
      const zsl::IdentityReport report = zsl::run_identities(cfg);
      std::ofstream out(cfg.out, std::ios::binary);
      if (!out) throw zsl::ConfigError("cannot open output: " + cfg.out);
      out << report.to_json(cfg.base_seed).dump(2) << "\n";
      if (!report.all_pass) {
        std::cerr << "identity battery reported failures\n";
        return 1;
      }
    }
  } catch (const zsl::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}

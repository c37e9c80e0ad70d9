// eitgate: run gate-protocol experiments described by TOML configs.
//
//   eitgate run configs/raman_scan.toml --out-dir out
//   eitgate validate configs/bell_7p12.toml
//   eitgate presets

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "eitgate/config.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIntegrator = 3;

std::optional<std::string> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Parses and validates; prints diagnostics. Returns the config only if runnable.
std::optional<eitgate::ExperimentConfig> load(const std::string& path,
                                              std::vector<eitgate::Diagnostic>* all = nullptr) {
  const auto text = slurp(path);
  if (!text) {
    std::cerr << "error: " << path << ": cannot read file\n";
    return std::nullopt;
  }
  auto parsed = eitgate::parse_config(*text, path);
  std::vector<eitgate::Diagnostic> diags = parsed.diagnostics;
  if (parsed.config) {
    auto v = eitgate::validate_config(*parsed.config);
    diags.insert(diags.end(), v.begin(), v.end());
  }
  for (const auto& d : diags) std::cerr << path << ": " << eitgate::to_string(d) << "\n";
  if (all) *all = diags;
  if (!parsed.config || eitgate::has_errors(diags)) return std::nullopt;
  return parsed.config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EIT Rydberg gate simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", eitgate::kToolVersion);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> trajectories;
  std::optional<int> threads;

  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("config", config_path, "TOML config")->required();
  run->add_option("--out-dir", out_dir, "output directory (overrides output.dir)");
  run->add_option("--seed", seed, "random seed (overrides seed)");
  run->add_option("--trajectories", trajectories, "trajectory count (overrides integrator.trajectories)")
      ->check(CLI::PositiveNumber);
  run->add_option("--threads", threads, "worker threads (default: $EITGATE_THREADS or 1)")
      ->check(CLI::NonNegativeNumber);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", validate_path, "TOML config")->required();

  auto* presets = app.add_subcommand("presets", "list level-scheme presets");

  CLI11_PARSE(app, argc, argv);

  if (*presets) {
    for (const auto& p : eitgate::preset_catalog()) {
      std::cout << p.id << "\t" << p.description << "\n";
    }
    return 0;
  }

  if (*validate) {
    std::vector<eitgate::Diagnostic> diags;
    const bool ok = load(validate_path, &diags).has_value();
    if (ok && diags.empty()) std::cout << validate_path << ": ok\n";
    return ok ? 0 : kExitConfig;
  }

  auto cfg = load(config_path);
  if (!cfg) return kExitConfig;
  if (out_dir) cfg->out_dir = *out_dir;
  if (seed) cfg->seed = *seed;
  if (trajectories) cfg->trajectories = *trajectories;
  if (threads) cfg->threads = *threads;

  try {
    const auto result = eitgate::run_experiment(*cfg);
    for (const auto& f : result.files) std::cout << f << "\n";
  } catch (const eitgate::IntegratorError& e) {
    std::cerr << "integrator error: " << e.what() << "\n";
    return kExitIntegrator;
  } catch (const eitgate::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: generate, prune, sweep, verify.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chanprune/chanprune.hpp"

namespace cp = chanprune;

namespace {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kIoError = 3,
  kValidationError = 4,
  kInvariantFailure = 5,
  kCapacityError = 6,
};

// Flags shared by every subcommand; unset ones leave the config untouched.
struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> seeds;
  std::vector<std::string> lambdas;
  std::vector<std::string> selectors;
  std::optional<bool> protect;
  std::string protect_bounds;
  bool oracle = false;
  bool timing = false;
  std::optional<unsigned> threads;
  std::string out;
  std::vector<std::string> settings;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--seed", seed, "first seed");
    app.add_option("--seeds", seeds, "number of consecutive seeds");
    app.add_option("--lambda", lambdas, "pruning ratio(s)")->delimiter(',');
    app.add_option("--selector", selectors, "MIES, THINK, RANDOM, ORACLE")->delimiter(',');
    app.add_flag_callback("--protect", [this] { protect = true; }, "enable channel protection");
    app.add_flag_callback("--no-protect", [this] { protect = false; },
                          "disable channel protection");
    app.add_option("--protect-bounds", protect_bounds, "clamp bounds A,B");
    app.add_flag("--oracle", oracle, "compute exhaustive optimum and approximation ratio");
    app.add_flag("--timing", timing, "record wall time per row");
    app.add_option("--threads", threads, "sweep worker threads");
    app.add_option("--out", out, "output path");
    app.add_option("--set", settings, "extra key=value override (repeatable)");
  }

  cp::ExperimentConfig resolve() const {
    cp::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = cp::load_config(config_path, cfg);
    for (const auto& kv : settings) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw cp::ConfigError("--set expects key=value, got '" + kv + "'");
      cp::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.seed = *seed;
    if (seeds) cfg.seed_count = *seeds;
    if (!lambdas.empty()) cp::apply_setting(cfg, "lambda", join(lambdas));
    if (!selectors.empty()) cp::apply_setting(cfg, "selector", join(selectors));
    if (protect) cfg.policy.enabled = *protect;
    if (!protect_bounds.empty()) cp::apply_setting(cfg, "protect_bounds", protect_bounds);
    if (oracle) cfg.oracle_enabled = true;
    if (timing) cfg.timing = true;
    if (threads) cfg.threads = *threads;
    if (!out.empty()) cfg.output_path = out;
    cfg.validate();
    return cfg;
  }

  static std::string join(const std::vector<std::string>& items) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + items[i];
    return s;
  }
};

int cmd_generate(const cp::ExperimentConfig& cfg) {
  if (cfg.mode != cp::DataMode::kSynthetic) throw cp::ConfigError("generate needs mode=synthetic");
  const std::filesystem::path dir = cfg.output_path.empty() ? "." : cfg.output_path;
  std::filesystem::create_directories(dir);
  for (std::uint64_t i = 0; i < cfg.seed_count; ++i) {
    cp::SyntheticSpec spec = cfg.spec;
    spec.seed = cfg.seed + i;
    const auto inst = cp::generate_instance(spec);
    const std::string stem = "seed" + std::to_string(spec.seed);
    cp::save_matrix(inst.q_obs, dir / (stem + "_q_obs.grcm"));
    cp::save_matrix(inst.k, dir / (stem + "_k.grcm"));
    cp::save_matrix(inst.q_future, dir / (stem + "_q_future.grcm"));
    std::cout << "wrote " << (dir / stem).string() << "_{q_obs,k,q_future}.grcm\n";
  }
  return kOk;
}

int cmd_prune(const cp::ExperimentConfig& cfg) {
  std::optional<cp::ChannelMatrix> q, k;
  if (cfg.mode == cp::DataMode::kFromFiles) {
    q = cp::load_matrix(cfg.q_path);
    k = cp::load_matrix(cfg.k_path);
  } else {
    cp::SyntheticSpec spec = cfg.spec;
    spec.seed = cfg.seed;
    auto inst = cp::generate_instance(spec);
    q = std::move(inst.q_obs);
    k = std::move(inst.k);
  }
  const auto protected_set = cp::protect_channels(*k, cfg.policy);
  const double energy = cp::attention_energy_sq(*q, *k);
  for (double lambda : cfg.lambdas) {
    for (cp::Selector s : cfg.selectors) {
      const auto sel =
          cp::select_channels(s, *q, *k, lambda, protected_set, cfg.seed, cfg.oracle_cap);
      std::cout << cp::to_string(s) << " lambda=" << lambda << " n_prune=" << sel.n_prune
                << (sel.budget_clamped ? " (clamped)" : "") << " protected={";
      for (std::size_t i = 0; i < sel.protected_set.size(); ++i)
        std::cout << (i ? "," : "") << sel.protected_set.indices()[i];
      std::cout << "} pruned={";
      for (std::size_t i = 0; i < sel.pruned.size(); ++i)
        std::cout << (i ? "," : "") << sel.pruned.indices()[i];
      char buf[96];
      std::snprintf(buf, sizeof buf, "} error_sq=%.12g relative_error=%.12g", sel.error_sq,
                    energy > 0.0 ? std::sqrt(std::max(0.0, sel.error_sq) / energy) : 0.0);
      std::cout << buf << '\n';
    }
  }
  return kOk;
}

int cmd_sweep(const cp::ExperimentConfig& cfg) {
  const auto report = cp::run_experiment(cfg);
  if (cfg.output_path.empty()) {
    std::cout << cp::report_to_csv(report);
  } else {
    cp::write_report(report, cfg.output_path);
    std::cerr << "wrote " << report.rows.size() << " rows to " << cfg.output_path << '\n';
  }
  return kOk;
}

int cmd_verify(const cp::ExperimentConfig& cfg, const std::string& fault) {
  cp::VerifyOptions opts;
  opts.seed = cfg.seed;
  if (fault == "symmetry") {
    opts.fault = cp::InjectedFault::kBreakSymmetry;
  } else if (!fault.empty()) {
    throw cp::ConfigError("unknown fault '" + fault + "'");
  }
  const auto summary = cp::verify(opts);
  std::cout << summary;
  return summary.passed() ? kOk : kInvariantFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-guided KV-cache channel pruning experiments"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string fault;
  auto* generate = app.add_subcommand("generate", "write synthetic GRCM matrices");
  auto* prune = app.add_subcommand("prune", "run one selection and print the pruned channels");
  auto* sweep = app.add_subcommand("sweep", "run an experiment sweep and emit CSV");
  auto* verify = app.add_subcommand("verify", "run the built-in invariant self-check");
  for (auto* sub : {generate, prune, sweep, verify}) flags.attach(*sub);
  verify->add_option("--inject-fault", fault, "corrupt inputs on purpose (symmetry)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    const auto cfg = flags.resolve();
    if (generate->parsed()) return cmd_generate(cfg);
    if (prune->parsed()) return cmd_prune(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    return cmd_verify(cfg, fault);
  } catch (const cp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const cp::ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << '\n';
    return kConfigError;
  } catch (const cp::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const cp::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kCapacityError;
  } catch (const cp::Error& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIoError;
  }
}

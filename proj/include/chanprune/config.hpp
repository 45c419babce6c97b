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

#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "chanprune/error.hpp"
#include "chanprune/prune.hpp"
#include "chanprune/sim.hpp"

namespace chanprune {

enum class DataMode { kSynthetic, kFromFiles };

/// Fully resolved experiment settings.
///
/// Text form is one `key=value` per line; `#` starts a comment. The same form
/// is echoed at the top of every report, so a report can be parsed back into
/// the config that produced it.
struct ExperimentConfig {
  DataMode mode = DataMode::kSynthetic;
  SyntheticSpec spec;
  std::string q_path;
  std::string k_path;
  std::string q_future_path;
  std::vector<double> lambdas{0.5};
  std::vector<Selector> selectors{Selector::kMies, Selector::kThink};
  ProtectionPolicy policy = ProtectionPolicy::disabled();
  std::uint64_t seed = 0;
  std::uint64_t seed_count = 1;
  bool oracle_enabled = false;
  std::uint64_t oracle_cap = kDefaultEnumerationCap;
  std::string output_path;
  // Off by default: wall-clock times would make reports non-reproducible.
  bool timing = false;
  unsigned threads = 1;

  void validate() const {
    if (lambdas.empty()) throw ConfigError("at least one lambda is required");
    for (double l : lambdas) {
      if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("lambda values must lie in [0, 1]");
    }
    if (selectors.empty()) throw ConfigError("at least one selector is required");
    if (seed_count == 0) throw ConfigError("seeds must be >= 1");
    if (threads == 0) throw ConfigError("threads must be >= 1");
    if (mode == DataMode::kFromFiles && (q_path.empty() || k_path.empty())) {
      throw ConfigError("from-files mode requires q_path and k_path");
    }
    try {
      policy.validate();
      if (mode == DataMode::kSynthetic) spec.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline std::string format_double(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string trim_copy(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim_copy(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_real(std::string_view key, std::string_view text) {
  const std::string t = trim_copy(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ConfigError("'" + std::string(key) + "': expected a finite number, got '" + t + "'");
  }
  return v;
}

inline std::uint64_t parse_count(std::string_view key, std::string_view text) {
  const std::string t = trim_copy(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("'" + std::string(key) + "': expected a non-negative integer, got '" +
                      t + "'");
  }
  return v;
}

inline bool parse_flag(std::string_view key, std::string_view text) {
  const std::string t = trim_copy(text);
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw ConfigError("'" + std::string(key) + "': expected a boolean, got '" + t + "'");
}

}  // namespace detail

/// Applies one key=value setting. Unknown keys are a ConfigError.
inline void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  using namespace detail;
  const std::string k = trim_copy(key);
  const std::string v = trim_copy(value);
  if (k == "mode") {
    if (v == "synthetic") cfg.mode = DataMode::kSynthetic;
    else if (v == "from-files") cfg.mode = DataMode::kFromFiles;
    else throw ConfigError("mode must be 'synthetic' or 'from-files'");
  } else if (k == "d") {
    cfg.spec.d = parse_count(k, v);
  } else if (k == "L") {
    cfg.spec.L = parse_count(k, v);
  } else if (k == "L_obs") {
    cfg.spec.L_obs = parse_count(k, v);
  } else if (k == "L_future") {
    cfg.spec.L_future = parse_count(k, v);
  } else if (k == "outlier_fraction") {
    cfg.spec.outlier_fraction = parse_real(k, v);
  } else if (k == "outlier_scale") {
    cfg.spec.outlier_scale = parse_real(k, v);
  } else if (k == "drift_gamma") {
    cfg.spec.drift_gamma = parse_real(k, v);
  } else if (k == "scale_log_mean") {
    cfg.spec.scale_log_mean = parse_real(k, v);
  } else if (k == "scale_log_std") {
    cfg.spec.scale_log_std = parse_real(k, v);
  } else if (k == "q_path") {
    cfg.q_path = v;
  } else if (k == "k_path") {
    cfg.k_path = v;
  } else if (k == "q_future_path") {
    cfg.q_future_path = v;
  } else if (k == "lambda") {
    cfg.lambdas.clear();
    for (const auto& item : split_list(v)) cfg.lambdas.push_back(parse_real(k, item));
  } else if (k == "selector") {
    cfg.selectors.clear();
    for (const auto& item : split_list(v)) {
      try {
        cfg.selectors.push_back(parse_selector(item));
      } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
      }
    }
  } else if (k == "protect") {
    cfg.policy.enabled = parse_flag(k, v);
  } else if (k == "threshold_sigma") {
    cfg.policy.threshold_sigma = parse_real(k, v);
  } else if (k == "protect_bounds") {
    const auto parts = split_list(v);
    if (parts.size() != 2) throw ConfigError("protect_bounds expects 'A,B'");
    cfg.policy.a = parse_real(k, parts[0]);
    cfg.policy.b = parse_real(k, parts[1]);
  } else if (k == "seed") {
    cfg.seed = parse_count(k, v);
  } else if (k == "seeds") {
    cfg.seed_count = parse_count(k, v);
  } else if (k == "oracle") {
    cfg.oracle_enabled = parse_flag(k, v);
  } else if (k == "oracle_cap") {
    cfg.oracle_cap = parse_count(k, v);
  } else if (k == "out") {
    cfg.output_path = v;
  } else if (k == "timing") {
    cfg.timing = parse_flag(k, v);
  } else if (k == "threads") {
    cfg.threads = static_cast<unsigned>(parse_count(k, v));
  } else {
    throw ConfigError("unknown config key '" + k + "'");
  }
}

/// Parses key=value lines on top of `base`. A leading '#' on a line is
/// stripped when `echoed` is set (the report header form); otherwise '#' lines
/// are comments.
inline ExperimentConfig parse_config_text(std::string_view text, ExperimentConfig base = {},
                                          bool echoed = false) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = detail::trim_copy(line);
    if (echoed) {
      if (body.empty() || body[0] != '#') break;
      body = detail::trim_copy(std::string_view(body).substr(1));
    } else if (!body.empty() && body[0] == '#') {
      continue;
    }
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    apply_setting(base, std::string_view(body).substr(0, eq),
                  std::string_view(body).substr(eq + 1));
  }
  return base;
}

inline ExperimentConfig load_config(const std::filesystem::path& path,
                                    ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

/// Canonical key=value lines, one per setting, in a fixed order. Reals use 17
/// significant digits so the echo parses back to the same doubles.
inline std::vector<std::string> config_lines(const ExperimentConfig& cfg) {
  using detail::format_double;
  auto real = [](double v) { return format_double(v, 17); };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  std::string lambdas;
  for (std::size_t i = 0; i < cfg.lambdas.size(); ++i) {
    lambdas += (i ? "," : "") + real(cfg.lambdas[i]);
  }
  std::string selectors;
  for (std::size_t i = 0; i < cfg.selectors.size(); ++i) {
    selectors += (i ? "," : "") + std::string(to_string(cfg.selectors[i]));
  }
  std::vector<std::string> lines{
      "mode=" + std::string(cfg.mode == DataMode::kSynthetic ? "synthetic" : "from-files")};
  if (cfg.mode == DataMode::kSynthetic) {
    const auto& s = cfg.spec;
    lines.push_back("d=" + std::to_string(s.d));
    lines.push_back("L=" + std::to_string(s.L));
    lines.push_back("L_obs=" + std::to_string(s.L_obs));
    lines.push_back("L_future=" + std::to_string(s.L_future));
    lines.push_back("outlier_fraction=" + real(s.outlier_fraction));
    lines.push_back("outlier_scale=" + real(s.outlier_scale));
    lines.push_back("drift_gamma=" + real(s.drift_gamma));
    lines.push_back("scale_log_mean=" + real(s.scale_log_mean));
    lines.push_back("scale_log_std=" + real(s.scale_log_std));
  } else {
    lines.push_back("q_path=" + cfg.q_path);
    lines.push_back("k_path=" + cfg.k_path);
    lines.push_back("q_future_path=" + cfg.q_future_path);
  }
  lines.push_back("lambda=" + lambdas);
  lines.push_back("selector=" + selectors);
  lines.push_back("protect=" + flag(cfg.policy.enabled));
  lines.push_back("threshold_sigma=" + real(cfg.policy.threshold_sigma));
  lines.push_back("protect_bounds=" + real(cfg.policy.a) + "," + real(cfg.policy.b));
  lines.push_back("seed=" + std::to_string(cfg.seed));
  lines.push_back("seeds=" + std::to_string(cfg.seed_count));
  lines.push_back("oracle=" + flag(cfg.oracle_enabled));
  lines.push_back("oracle_cap=" + std::to_string(cfg.oracle_cap));
  lines.push_back("timing=" + flag(cfg.timing));
  return lines;
}

}  // namespace chanprune

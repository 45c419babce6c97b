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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "chanprune/config.hpp"
#include "chanprune/core.hpp"
#include "chanprune/graph.hpp"
#include "chanprune/matrix_io.hpp"
#include "chanprune/prune.hpp"
#include "chanprune/sim.hpp"

namespace chanprune {

enum class ApproxStatus { kNotRequested, kValue, kOracleSkipped, kOptimumZero };

inline constexpr std::string_view kOracleSkipped = "oracle_skipped";
inline constexpr std::string_view kOptimumZero = "opt_zero";

struct ReportRow {
  std::size_t instance_id = 0;
  std::uint64_t seed = 0;
  Selector selector = Selector::kMies;
  double lambda = 0.0;
  bool protection = false;
  std::size_t n_prune = 0;
  std::size_t n_protected = 0;
  // Empty only for an ORACLE row whose enumeration exceeded the cap.
  std::optional<double> error_sq;
  std::optional<double> relative_error;
  std::optional<double> error_future;
  ApproxStatus approx_status = ApproxStatus::kNotRequested;
  double approx_ratio = 0.0;
  std::optional<double> wall_time_ms;
  // Not serialized; kept for in-process checks.
  IndexSet pruned;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ReportRow> rows;
};

inline constexpr std::string_view kReportHeader =
    "instance_id,seed,selector,lambda,protection,n_prune,n_protected,error_sq,"
    "relative_error,error_future,approx_ratio,wall_time_ms";

namespace detail {

struct LoadedInstance {
  ChannelMatrix q;
  ChannelMatrix k;
  std::optional<ChannelMatrix> q_future;
};

inline LoadedInstance load_instance(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.mode == DataMode::kSynthetic) {
    SyntheticSpec spec = cfg.spec;
    spec.seed = seed;
    auto inst = generate_instance(spec);
    return {std::move(inst.q_obs), std::move(inst.k), std::move(inst.q_future)};
  }
  LoadedInstance out{load_matrix(cfg.q_path), load_matrix(cfg.k_path), std::nullopt};
  if (!cfg.q_future_path.empty()) out.q_future = load_matrix(cfg.q_future_path);
  return out;
}

inline std::vector<ReportRow> run_instance(const ExperimentConfig& cfg, std::size_t instance_id,
                                           std::uint64_t seed, const LoadedInstance& data) {
  using Clock = std::chrono::steady_clock;
  require_same_width(data.q, data.k);
  if (data.q_future) require_same_width(*data.q_future, data.k);

  const auto g = build_interaction_graph(data.q, data.k);
  const auto scores = think_scores(data.q, data.k);
  const IndexSet protected_set = protect_channels(data.k, cfg.policy);
  const double energy = attention_energy_sq(data.q, data.k);
  if (energy == 0.0) throw DegenerateInputError("attention product is identically zero");
  const double future_energy =
      data.q_future ? attention_energy_sq(*data.q_future, data.k) : 1.0;
  if (future_energy == 0.0) {
    throw DegenerateInputError("future attention product is identically zero");
  }

  std::vector<ReportRow> rows;
  for (double lambda : cfg.lambdas) {
    std::optional<PruneSelection> optimum;
    bool oracle_skipped = false;
    auto oracle = [&]() -> const std::optional<PruneSelection>& {
      if (!optimum && !oracle_skipped) {
        try {
          optimum = oracle_select(g, lambda, protected_set, cfg.oracle_cap);
        } catch (const CapacityError&) {
          oracle_skipped = true;
        }
      }
      return optimum;
    };

    for (Selector selector : cfg.selectors) {
      ReportRow row;
      row.instance_id = instance_id;
      row.seed = seed;
      row.selector = selector;
      row.lambda = lambda;
      row.protection = cfg.policy.enabled;
      row.n_protected = protected_set.size();

      const auto start = Clock::now();
      std::optional<PruneSelection> sel;
      switch (selector) {
        case Selector::kMies: sel = mies_select(g, lambda, protected_set); break;
        case Selector::kThink: sel = think_select(g, scores, lambda, protected_set); break;
        case Selector::kRandom: sel = random_select(g, lambda, protected_set, seed); break;
        case Selector::kOracle: sel = oracle(); break;
      }
      const auto stop = Clock::now();
      if (cfg.timing) {
        row.wall_time_ms = std::chrono::duration<double, std::milli>(stop - start).count();
      }

      if (!sel) {
        row.n_prune = std::min(prune_budget(lambda, g.dim()), g.dim() - protected_set.size());
        row.approx_status = ApproxStatus::kOracleSkipped;
        rows.push_back(std::move(row));
        continue;
      }
      row.n_prune = sel->n_prune;
      row.pruned = sel->pruned;
      row.error_sq = sel->error_sq;
      row.relative_error = std::sqrt(std::max(0.0, sel->error_sq) / energy);
      if (data.q_future) {
        row.error_future = std::sqrt(
            reconstruction_error_sq(*data.q_future, data.k, sel->pruned) / future_energy);
      }
      if (cfg.oracle_enabled) {
        const auto& best = oracle();
        if (!best) {
          row.approx_status = ApproxStatus::kOracleSkipped;
        } else if (best->error_sq == 0.0) {
          row.approx_status = ApproxStatus::kOptimumZero;
        } else {
          row.approx_status = ApproxStatus::kValue;
          row.approx_ratio = sel->error_sq / best->error_sq;
        }
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace detail

/// Runs every (seed, lambda, selector) cell. Seeds are spread over
/// cfg.threads workers; rows come back sorted by (seed, lambda, selector), so
/// the report does not depend on scheduling.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentReport report{cfg, {}};

  // File mode reads the matrices once; only RANDOM depends on the seed.
  std::optional<detail::LoadedInstance> shared;
  if (cfg.mode == DataMode::kFromFiles) shared = detail::load_instance(cfg, cfg.seed);

  const std::size_t n = cfg.seed_count;
  std::vector<std::vector<ReportRow>> per_seed(n);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        const std::uint64_t seed = cfg.seed + i;
        if (shared) {
          per_seed[i] = detail::run_instance(cfg, i, seed, *shared);
        } else {
          per_seed[i] = detail::run_instance(cfg, i, seed, detail::load_instance(cfg, seed));
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(n);
      }
    }
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(cfg.threads, n));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  for (auto& rows : per_seed)
    for (auto& r : rows) report.rows.push_back(std::move(r));
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ReportRow& x, const ReportRow& y) {
                     return std::tie(x.seed, x.lambda, x.selector) <
                            std::tie(y.seed, y.lambda, y.selector);
                   });
  return report;
}

/// CSV text: resolved config as '#' lines, the header, one line per row.
/// Reals carry 12 significant digits.
inline std::string report_to_csv(const ExperimentReport& report) {
  auto real = [](double v) { return detail::format_double(v, 12); };
  auto opt = [&](const std::optional<double>& v) { return v ? real(*v) : std::string(); };
  std::ostringstream out;
  for (const auto& line : config_lines(report.config)) out << "# " << line << '\n';
  out << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    std::string approx;
    switch (r.approx_status) {
      case ApproxStatus::kNotRequested: break;
      case ApproxStatus::kValue: approx = real(r.approx_ratio); break;
      case ApproxStatus::kOracleSkipped: approx = kOracleSkipped; break;
      case ApproxStatus::kOptimumZero: approx = kOptimumZero; break;
    }
    std::string error_sq = opt(r.error_sq);
    if (!r.error_sq && r.approx_status == ApproxStatus::kOracleSkipped) {
      error_sq = kOracleSkipped;
    }
    out << r.instance_id << ',' << r.seed << ',' << to_string(r.selector) << ','
        << real(r.lambda) << ',' << (r.protection ? 1 : 0) << ',' << r.n_prune << ','
        << r.n_protected << ',' << error_sq << ',' << opt(r.relative_error) << ','
        << opt(r.error_future) << ',' << approx << ','
        << opt(r.wall_time_ms) << '\n';
  }
  return out.str();
}

inline void write_report(const ExperimentReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << report_to_csv(report);
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

/// One data line of a report, as read back.
struct ParsedRow {
  std::size_t instance_id = 0;
  std::uint64_t seed = 0;
  Selector selector = Selector::kMies;
  double lambda = 0.0;
  bool protection = false;
  std::size_t n_prune = 0;
  std::optional<double> error_sq;
};

struct ReplayOutcome {
  std::size_t rows_checked = 0;
  std::size_t rows_skipped = 0;
  // Largest |recorded - recomputed| / max(1, |recomputed|).
  double max_relative_deviation = 0.0;
};

/// Parses a report back into its config and rows.
inline std::pair<ExperimentConfig, std::vector<ParsedRow>> parse_report(std::string_view csv) {
  ExperimentConfig cfg = parse_config_text(csv, ExperimentConfig{}, /*echoed=*/true);
  std::vector<ParsedRow> rows;
  std::istringstream in{std::string(csv)};
  std::string line;
  bool in_body = false;
  while (std::getline(in, line)) {
    if (!in_body) {
      if (line == kReportHeader) in_body = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = detail::split_list(line);
    if (f.size() != 12) throw FormatError("report row has " + std::to_string(f.size()) +
                                              " fields, expected 12", 0);
    try {
      ParsedRow r;
      r.instance_id = detail::parse_count("instance_id", f[0]);
      r.seed = detail::parse_count("seed", f[1]);
      r.selector = parse_selector(f[2]);
      r.lambda = detail::parse_real("lambda", f[3]);
      r.protection = f[4] == "1";
      r.n_prune = detail::parse_count("n_prune", f[5]);
      if (!f[7].empty() && f[7] != kOracleSkipped) r.error_sq = detail::parse_real("error_sq", f[7]);
      rows.push_back(r);
    } catch (const Error& e) {
      throw FormatError(std::string("bad report row: ") + e.what(), 0);
    }
  }
  if (!in_body) throw FormatError("report header line not found", 0);
  return {std::move(cfg), std::move(rows)};
}

/// Recomputes every row's error_sq from its (seed, selector, lambda) and the
/// embedded config, evaluating the pruned set by direct reconstruction.
inline ReplayOutcome replay_report(std::string_view csv, std::string_view q_path_override = {},
                                   std::string_view k_path_override = {}) {
  auto [cfg, rows] = parse_report(csv);
  if (!q_path_override.empty()) cfg.q_path = q_path_override;
  if (!k_path_override.empty()) cfg.k_path = k_path_override;
  ReplayOutcome out;
  std::map<std::uint64_t, detail::LoadedInstance> cache;
  for (const auto& r : rows) {
    if (!r.error_sq) {
      ++out.rows_skipped;
      continue;
    }
    auto it = cache.find(r.seed);
    if (it == cache.end()) it = cache.emplace(r.seed, detail::load_instance(cfg, r.seed)).first;
    const auto& data = it->second;
    const IndexSet protected_set = protect_channels(data.k, cfg.policy);
    const auto sel = select_channels(r.selector, data.q, data.k, r.lambda, protected_set,
                                     r.seed, cfg.oracle_cap);
    const double direct = reconstruction_error_sq(data.q, data.k, sel.pruned);
    const double dev = std::abs(*r.error_sq - direct) / std::max(1.0, std::abs(direct));
    out.max_relative_deviation = std::max(out.max_relative_deviation, dev);
    ++out.rows_checked;
  }
  return out;
}

}  // namespace chanprune

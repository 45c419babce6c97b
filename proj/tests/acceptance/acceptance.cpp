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

// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "chanprune/chanprune.hpp"

namespace cp = chanprune;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* id;
  const char* name;
  double time_limit_s;  // <= 0: no limit
  std::function<Outcome()> body;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. |decomposed - direct| <= 1e-9 max(1, direct) on 500 instances x 5 subsets.
Outcome decomposition_identity() {
  std::uniform_int_distribution<std::size_t> len(4, 32), width(2, 32);
  std::size_t checks = 0, failures = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t l_obs = len(rng), l = len(rng), d = width(rng);
    const auto [q, k] = cp::gaussian_pair(l_obs, l, d, rng);
    const auto g = cp::build_interaction_graph(q, k);
    for (int s = 0; s < 5; ++s) {
      const auto subset = cp::random_subset(d, rng);
      const double direct = cp::reconstruction_error_sq(q, k, subset);
      const double dev = std::abs(cp::decomposed_error_sq(g, subset) - direct) /
                         std::max(1.0, direct);
      worst = std::max(worst, dev);
      failures += dev > 1e-9;
      ++checks;
    }
  }
  return {failures == 0, fmt("%zu checks, %zu failures, max scaled deviation %.3g", checks,
                             failures, worst)};
}

// 2. Every maintained MIES score equals f(pruned + candidate) within 1e-9 relative.
Outcome score_soundness() {
  std::uniform_int_distribution<std::size_t> len(4, 32), width(2, 32);
  std::size_t checks = 0, failures = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(1'000'000 + seed);
    const std::size_t l_obs = len(rng), l = len(rng), d = width(rng);
    const auto [q, k] = cp::gaussian_pair(l_obs, l, d, rng);
    const auto g = cp::build_interaction_graph(q, k);
    cp::mies_select(g, 1.0, {}, [&](const cp::MiesStep& step) {
      std::vector<std::size_t> with(step.pruned.begin(), step.pruned.end());
      with.push_back(0);
      for (std::size_t c : step.candidates) {
        with.back() = c;
        const double direct = cp::quadratic_form(g, with);
        const double dev = std::abs(step.cumulative_score(c) - direct) /
                           std::max(1.0, std::abs(direct));
        worst = std::max(worst, dev);
        failures += dev > 1e-9;
        ++checks;
      }
    });
  }
  return {failures == 0, fmt("%zu step/candidate checks, %zu failures, max rel deviation %.3g",
                             checks, failures, worst)};
}

// 3. f(oracle) <= f(MIES); f(MIES) <= kappa f(oracle) + 1e-9 where mu_min > 1e-8.
Outcome oracle_and_bound() {
  std::uniform_int_distribution<std::size_t> len(4, 32);
  std::size_t dominance_failures = 0, bounded = 0, bound_failures = 0, optimal = 0;
  double worst_ratio = 1.0, max_kappa = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(2'000'000 + seed);
    const std::size_t l_obs = len(rng), l = len(rng);
    const auto [q, k] = cp::gaussian_pair(l_obs, l, 10, rng);
    const auto g = cp::build_interaction_graph(q, k);
    const auto greedy = cp::mies_select(g, 0.5);
    const auto best = cp::oracle_select(g, 0.5);
    if (greedy.n_prune != 5) return {false, "n_prune != 5"};
    dominance_failures += !(best.error_sq <= greedy.error_sq);
    optimal += greedy.pruned == best.pruned;
    if (best.error_sq > 0.0) worst_ratio = std::max(worst_ratio, greedy.error_sq / best.error_sq);
    const auto cert = cp::restricted_eigenvalues(g, 5);
    if (cert.mu_min > 1e-8) {
      ++bounded;
      max_kappa = std::max(max_kappa, cert.kappa);
      bound_failures += !(greedy.error_sq <= cert.kappa * best.error_sq + 1e-9);
    }
  }
  return {dominance_failures == 0 && bound_failures == 0,
          fmt("dominance failures %zu/200, bound failures %zu/%zu certified, greedy optimal on "
              "%zu, worst f(MIES)/f(opt) %.4f, max kappa %.3g",
              dominance_failures, bound_failures, bounded, optimal, worst_ratio, max_kappa)};
}

// 4. Mean error MIES <= THINK and MIES wins or ties on >= 60% per lambda.
Outcome mies_vs_think() {
  cp::ExperimentConfig cfg;
  cfg.spec.d = 64;
  cfg.seed_count = 500;
  cfg.lambdas = {0.5, 0.6};
  cfg.selectors = {cp::Selector::kMies, cp::Selector::kThink};
  cfg.threads = std::max(1u, std::thread::hardware_concurrency());
  const auto report = cp::run_experiment(cfg);
  bool pass = true;
  std::string detail;
  for (double lambda : cfg.lambdas) {
    double mies = 0.0, think = 0.0;
    std::size_t wins = 0, n = 0;
    for (std::size_t i = 0; i + 1 < report.rows.size(); ++i) {
      const auto& a = report.rows[i];
      const auto& b = report.rows[i + 1];
      if (a.lambda != lambda || a.selector != cp::Selector::kMies) continue;
      if (b.selector != cp::Selector::kThink || b.seed != a.seed) return {false, "row layout"};
      mies += *a.error_sq;
      think += *b.error_sq;
      wins += *a.error_sq <= *b.error_sq;
      ++n;
    }
    const double win_rate = static_cast<double>(wins) / static_cast<double>(n);
    pass = pass && n == 500 && mies <= think && win_rate >= 0.60;
    if (!detail.empty()) detail += "; ";
    detail += fmt("lambda %.1f: mean MIES %.6g vs THINK %.6g (%.1f%% lower), wins %zu/%zu",
                  lambda, mies / n, think / n, 100.0 * (1.0 - mies / think), wins, n);
  }
  return {pass, detail};
}

// 5. Worked protection example and both clamp directions, exact.
Outcome protection_mechanism() {
  cp::ProtectionPolicy policy;
  policy.threshold_sigma = 1.0;
  policy.a = 0.05;
  policy.b = 0.25;
  const std::vector<double> norms{1, 1, 1, 1, 10};
  const auto st = cp::protection_stats(norms, policy);
  const auto set = cp::protect_channels(cp::ChannelMatrix(1, 5, norms), policy);
  const bool worked = set.indices() == std::vector<std::size_t>{4} && st.mean == 2.8 &&
                      st.stddev == 3.6 && st.threshold == 6.4 && st.raw_fraction == 0.2;

  cp::ProtectionPolicy upper;
  upper.threshold_sigma = 0.5;
  upper.a = 0.0;
  upper.b = 0.1;
  const auto hi = cp::protection_stats(std::vector<double>{1, 1, 1, 1, 1, 9, 9, 9, 9, 9}, upper);
  const bool clamp_b = hi.raw_fraction == 0.5 && hi.clamped_fraction == 0.1 && hi.count == 1;

  cp::ProtectionPolicy lower;
  lower.a = 0.1;
  lower.b = 0.2;
  const auto lo = cp::protection_stats(std::vector<double>(10, 2.0), lower);
  const bool clamp_a = lo.raw_fraction == 0.0 && lo.clamped_fraction == 0.1 && lo.count == 1;

  return {worked && clamp_b && clamp_a,
          fmt("worked example protected={4}: %s (mean %.17g, std %.17g, tau %.17g); p=0.5->b: "
              "%s; p=0->a: %s",
              worked ? "yes" : "no", st.mean, st.stddev, st.threshold, clamp_b ? "yes" : "no",
              clamp_a ? "yes" : "no")};
}

// 6. Mean future-query error with protection <= without, 95% paired bootstrap.
Outcome drift_benefit() {
  std::vector<double> with(200), without(200);
  std::size_t changed = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    cp::SyntheticSpec spec;
    spec.d = 128;
    spec.outlier_fraction = 0.05;
    spec.outlier_scale = 10.0;
    spec.drift_gamma = 0.5;
    spec.seed = seed;
    const auto inst = cp::generate_instance(spec);
    const auto on = cp::drift_evaluate(inst.q_obs, inst.k, inst.q_future, cp::Selector::kMies,
                                       0.6, cp::ProtectionPolicy{});
    const auto off = cp::drift_evaluate(inst.q_obs, inst.k, inst.q_future, cp::Selector::kMies,
                                        0.6, cp::ProtectionPolicy::disabled());
    with[seed] = on.error_future;
    without[seed] = off.error_future;
    changed += on.selection.pruned != off.selection.pruned;
  }
  std::vector<double> diff(200);
  for (std::size_t i = 0; i < 200; ++i) diff[i] = with[i] - without[i];

  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> pick(0, 199);
  std::vector<double> means(10000);
  for (double& m : means) {
    double s = 0.0;
    for (int i = 0; i < 200; ++i) s += diff[pick(rng)];
    m = s / 200.0;
  }
  std::sort(means.begin(), means.end());
  const double upper = means[static_cast<std::size_t>(0.95 * means.size()) - 1];
  const double mw = std::accumulate(with.begin(), with.end(), 0.0) / 200.0;
  const double mo = std::accumulate(without.begin(), without.end(), 0.0) / 200.0;
  return {upper <= 0.0,
          fmt("mean future rel. error with %.6g vs without %.6g, 95%% bootstrap upper bound "
              "of mean difference %.3g, pruned set changed on %zu/200 seeds",
              mw, mo, upper, changed)};
}

// 7. lambda_min(W) >= -1e-8 ||W||_F on 100 instances; mu_min k <= f(S) <= mu_max k for
// every enumerated size-k support at d <= 12.
Outcome psd_and_rayleigh() {
  std::uniform_int_distribution<std::size_t> len(4, 32), width(2, 32), small(2, 12);
  std::size_t psd_fail = 0, ray_checks = 0, ray_fail = 0;
  double worst_psd = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(3'000'000 + seed);
    const std::size_t l_obs = len(rng), l = len(rng), d = width(rng);
    const auto [q, k] = cp::gaussian_pair(l_obs, l, d, rng);
    const auto g = cp::build_interaction_graph(q, k);
    const double scaled = cp::min_eigenvalue(g) / g.frobenius_norm();
    worst_psd = std::min(worst_psd, scaled);
    psd_fail += scaled < -1e-8;
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(4'000'000 + seed);
    const std::size_t d = small(rng);
    const auto [q, k] = cp::gaussian_pair(len(rng), len(rng), d, rng);
    const auto g = cp::build_interaction_graph(q, k);
    std::vector<std::size_t> pool(d);
    std::iota(pool.begin(), pool.end(), 0u);
    for (std::size_t size = 1; size <= d; ++size) {
      const auto cert = cp::restricted_eigenvalues(g, size);
      // Round-off allowance for Jacobi and the summation in f(S).
      const double slack = 1e-9 * cert.mu_max * static_cast<double>(size);
      cp::for_each_combination(std::span<const std::size_t>(pool), size,
                               [&](std::span<const std::size_t> s) {
                                 const double f = cp::quadratic_form(g, s);
                                 const double kk = static_cast<double>(size);
                                 ray_fail += !(cert.mu_min * kk <= f + slack &&
                                               f <= cert.mu_max * kk + slack);
                                 ++ray_checks;
                               });
    }
  }
  return {psd_fail == 0 && ray_fail == 0,
          fmt("PSD failures %zu/100 (min lambda/||W||_F %.3g); Rayleigh failures %zu/%zu supports",
              psd_fail, worst_psd, ray_fail, ray_checks)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CHANPRUNE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 8. Byte-identical CSV for identical configs, bit-exact GRCM round trip, verify exit codes.
Outcome determinism_and_io() {
  const fs::path dir = fs::temp_directory_path() / "chanprune_acceptance";
  fs::create_directories(dir);

  cp::ExperimentConfig cfg;
  cfg.seed_count = 10;
  cfg.lambdas = {0.5, 0.6};
  cfg.selectors = {cp::Selector::kMies, cp::Selector::kThink, cp::Selector::kRandom};
  cfg.policy.enabled = true;
  const bool lib_same = cp::report_to_csv(cp::run_experiment(cfg)) ==
                        cp::report_to_csv(cp::run_experiment(cfg));
  const std::string sweep = "sweep --seeds 5 --lambda 0.5,0.6 --selector mies,think,random "
                            "--protect --out ";
  const bool cli_ran = run_cli(sweep + (dir / "a.csv").string()) == 0 &&
                       run_cli(sweep + (dir / "b.csv").string()) == 0;
  const bool cli_same = cli_ran && slurp(dir / "a.csv") == slurp(dir / "b.csv") &&
                        !slurp(dir / "a.csv").empty();

  std::mt19937_64 rng(5'000'000);
  std::uniform_int_distribution<std::size_t> dim(1, 64);
  std::size_t mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const auto m = cp::gaussian_matrix(dim(rng), dim(rng), rng);
    const auto p = dir / "m.grcm";
    cp::save_matrix(m, p);
    const auto back = cp::load_matrix(p);
    mismatches += back.rows() != m.rows() || back.cols() != m.cols() ||
                  std::memcmp(back.data().data(), m.data().data(), 8 * m.data().size()) != 0;
  }

  const int verify_ok = run_cli("verify");
  const int verify_bad = run_cli("verify --inject-fault symmetry");
  fs::remove_all(dir);
  return {lib_same && cli_same && mismatches == 0 && verify_ok == 0 && verify_bad != 0,
          fmt("library CSV identical: %s, CLI CSV identical: %s, GRCM mismatches %zu/100, "
              "verify exit %d, verify with injected fault exit %d",
              lib_same ? "yes" : "no", cli_same ? "yes" : "no", mismatches, verify_ok,
              verify_bad)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"1", "decomposition identity", 10.0, decomposition_identity},
      {"2", "MIES score-update soundness", 30.0, score_soundness},
      {"3", "oracle dominance and eigenvalue bound", 120.0, oracle_and_bound},
      {"4", "MIES vs THINK direction", 60.0, mies_vs_think},
      {"5", "protection mechanism", 0.0, protection_mechanism},
      {"6", "drift benefit of protection", 120.0, drift_benefit},
      {"7", "PSD and Rayleigh certificates", 0.0, psd_and_rayleigh},
      {"8", "determinism and I/O", 0.0, determinism_and_io},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.body();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.time_limit_s <= 0.0 || secs < c.time_limit_s;
    const bool pass = out.pass && in_time;
    failed += !pass;
    std::printf("[%s] criterion %s: %s -- %s; %.2f s", pass ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), secs);
    if (c.time_limit_s > 0.0) std::printf(" (limit %.0f s)", c.time_limit_s);
    std::printf("\n");
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chanprune/core.hpp"
#include "chanprune/graph.hpp"
#include "chanprune/prune.hpp"

namespace chanprune {

/// Standard-normal q (l_obs x d) and k (l x d).
struct GaussianPair {
  ChannelMatrix q;
  ChannelMatrix k;
};

inline ChannelMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = n(rng);
  return ChannelMatrix(rows, cols, std::move(v));
}

inline GaussianPair gaussian_pair(std::size_t l_obs, std::size_t l, std::size_t d,
                                  std::mt19937_64& rng) {
  auto q = gaussian_matrix(l_obs, d, rng);
  auto k = gaussian_matrix(l, d, rng);
  return {std::move(q), std::move(k)};
}

/// Uniform random subset of {0..d-1} with a uniformly drawn size.
inline IndexSet random_subset(std::size_t d, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> size_dist(0, d);
  const std::size_t m = size_dist(rng);
  std::vector<std::size_t> perm(d);
  for (std::size_t i = 0; i < d; ++i) perm[i] = i;
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, d - 1);
    std::swap(perm[i], perm[pick(rng)]);
  }
  perm.resize(m);
  return IndexSet(std::move(perm));
}

enum class InjectedFault {
  kNone,
  // Perturbs W_01 without touching W_10.
  kBreakSymmetry,
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  std::size_t decomposition_instances = 200;
  std::size_t soundness_instances = 100;
  std::size_t oracle_instances = 50;
  std::size_t psd_instances = 100;
  InjectedFault fault = InjectedFault::kNone;
};

struct SuiteResult {
  std::string name;
  std::size_t checks = 0;
  std::size_t failures = 0;
  // First failing instance: its seed and subset.
  std::string first_failure;
};

struct VerifySummary {
  std::vector<SuiteResult> suites;

  bool passed() const {
    return std::all_of(suites.begin(), suites.end(),
                       [](const SuiteResult& s) { return s.failures == 0; });
  }
};

inline std::ostream& operator<<(std::ostream& os, const VerifySummary& summary) {
  for (const auto& s : summary.suites) {
    os << (s.failures == 0 ? "PASS " : "FAIL ") << s.name << ": " << s.checks << " checks, "
       << s.failures << " failures";
    if (!s.first_failure.empty()) os << " (first: " << s.first_failure << ")";
    os << '\n';
  }
  return os;
}

namespace detail {

inline std::string describe(std::uint64_t seed, std::span<const std::size_t> subset) {
  std::ostringstream os;
  os << "seed " << seed << ", subset {";
  for (std::size_t i = 0; i < subset.size(); ++i) os << (i ? "," : "") << subset[i];
  os << '}';
  return os.str();
}

inline InteractionGraph apply_fault(const InteractionGraph& g, InjectedFault fault) {
  if (fault == InjectedFault::kNone || g.dim() < 2) return g;
  std::vector<double> w(g.values().begin(), g.values().end());
  w[1] += 1.0 + std::abs(w[1]);
  return InteractionGraph::from_matrix(g.dim(), std::move(w));
}

inline void record(SuiteResult& suite, bool ok, const std::string& where) {
  ++suite.checks;
  if (!ok) {
    if (suite.failures == 0) suite.first_failure = where;
    ++suite.failures;
  }
}

inline SuiteResult make_suite(std::string name) {
  SuiteResult s;
  s.name = std::move(name);
  return s;
}

inline bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace detail

/// Built-in self-check: symmetry, decomposition identity, MIES score
/// soundness, oracle dominance with the restricted-eigenvalue bound, and PSD,
/// each on its own stream of seeded Gaussian instances.
inline VerifySummary verify(const VerifyOptions& opts) {
  using detail::close_rel;
  using detail::describe;
  using detail::make_suite;
  using detail::record;
  VerifySummary summary;
  std::uniform_int_distribution<std::size_t> len(4, 32);
  std::uniform_int_distribution<std::size_t> width(2, 32);

  SuiteResult symmetry = make_suite("symmetry");
  SuiteResult decomposition = make_suite("decomposition-identity");
  for (std::size_t n = 0; n < opts.decomposition_instances; ++n) {
    const std::uint64_t seed = opts.seed + n;
    std::mt19937_64 rng(seed);
    const std::size_t l_obs = len(rng), l = len(rng), d = width(rng);
    const auto [q, k] = gaussian_pair(l_obs, l, d, rng);
    const auto g = detail::apply_fault(build_interaction_graph(q, k), opts.fault);
    record(symmetry, g.is_symmetric(), describe(seed, {}));
    for (int s = 0; s < 5; ++s) {
      const IndexSet subset = random_subset(d, rng);
      const double direct = reconstruction_error_sq(q, k, subset);
      const double decomposed = decomposed_error_sq(g, subset);
      record(decomposition, std::abs(direct - decomposed) <= 1e-9 * std::max(1.0, direct),
             describe(seed, subset.indices()));
    }
  }

  SuiteResult soundness = make_suite("mies-score-soundness");
  for (std::size_t n = 0; n < opts.soundness_instances; ++n) {
    const std::uint64_t seed = opts.seed + 100000 + n;
    std::mt19937_64 rng(seed);
    const std::size_t l_obs = len(rng), l = len(rng), d = width(rng);
    const auto [q, k] = gaussian_pair(l_obs, l, d, rng);
    const auto g = detail::apply_fault(build_interaction_graph(q, k), opts.fault);
    mies_select(g, 1.0, {}, [&](const MiesStep& step) {
      std::vector<std::size_t> with(step.pruned.begin(), step.pruned.end());
      with.push_back(0);
      for (std::size_t c : step.candidates) {
        with.back() = c;
        record(soundness, close_rel(step.cumulative_score(c), quadratic_form(g, with), 1e-9),
               describe(seed, with));
      }
    });
  }

  SuiteResult dominance = make_suite("oracle-dominance");
  SuiteResult bound = make_suite("eigenvalue-bound");
  for (std::size_t n = 0; n < opts.oracle_instances; ++n) {
    const std::uint64_t seed = opts.seed + 200000 + n;
    std::mt19937_64 rng(seed);
    const std::size_t l_obs = len(rng), l = len(rng);
    const auto [q, k] = gaussian_pair(l_obs, l, 10, rng);
    const auto g = detail::apply_fault(build_interaction_graph(q, k), opts.fault);
    const auto greedy = mies_select(g, 0.5);
    const auto best = oracle_select(g, 0.5);
    record(dominance, best.error_sq <= greedy.error_sq, describe(seed, greedy.pruned.indices()));
    const auto cert = restricted_eigenvalues(g, greedy.n_prune);
    if (cert.mu_min > 1e-8) {
      record(bound, greedy.error_sq <= cert.kappa * best.error_sq + 1e-9,
             describe(seed, greedy.pruned.indices()));
    }
  }

  SuiteResult psd = make_suite("psd");
  for (std::size_t n = 0; n < opts.psd_instances; ++n) {
    const std::uint64_t seed = opts.seed + 300000 + n;
    std::mt19937_64 rng(seed);
    const std::size_t l_obs = len(rng), l = len(rng), d = width(rng);
    const auto [q, k] = gaussian_pair(l_obs, l, d, rng);
    const auto g = detail::apply_fault(build_interaction_graph(q, k), opts.fault);
    record(psd, min_eigenvalue(g) >= -1e-8 * g.frobenius_norm(), describe(seed, {}));
  }

  summary.suites = {symmetry, decomposition, soundness, dominance, bound, psd};
  return summary;
}

}  // namespace chanprune

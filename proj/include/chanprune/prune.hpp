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
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chanprune/combinatorics.hpp"
#include "chanprune/core.hpp"
#include "chanprune/error.hpp"
#include "chanprune/graph.hpp"

namespace chanprune {

enum class Selector { kMies, kThink, kRandom, kOracle };

inline std::string_view to_string(Selector s) {
  switch (s) {
    case Selector::kMies: return "MIES";
    case Selector::kThink: return "THINK";
    case Selector::kRandom: return "RANDOM";
    case Selector::kOracle: return "ORACLE";
  }
  return "?";
}

/// Case-insensitive parse of a selector name.
inline Selector parse_selector(std::string_view name) {
  std::string upper(name);
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "MIES") return Selector::kMies;
  if (upper == "THINK") return Selector::kThink;
  if (upper == "RANDOM") return Selector::kRandom;
  if (upper == "ORACLE") return Selector::kOracle;
  throw ArgumentError("unknown selector '" + std::string(name) + "'");
}

/// Salient-channel protection parameters. Channels whose key norm exceeds
/// mean + threshold_sigma * std are candidates; the protected fraction is
/// clamped to [a, b].
struct ProtectionPolicy {
  double threshold_sigma = 1.0;
  double a = 0.01;
  double b = 0.125;
  bool enabled = true;

  void validate() const {
    if (!(threshold_sigma >= 0.0) || !std::isfinite(threshold_sigma)) {
      throw ArgumentError("threshold_sigma must be finite and >= 0");
    }
    if (!(a >= 0.0 && a <= b && b <= 1.0)) {
      throw ArgumentError("protection bounds must satisfy 0 <= a <= b <= 1");
    }
  }

  static ProtectionPolicy disabled() {
    ProtectionPolicy p;
    p.enabled = false;
    return p;
  }
};

/// Intermediate statistics of one protection decision.
struct ProtectionStats {
  double mean = 0.0;
  double stddev = 0.0;
  double threshold = 0.0;
  double raw_fraction = 0.0;
  double clamped_fraction = 0.0;
  std::size_t count = 0;
};

inline ProtectionStats protection_stats(std::span<const double> norms,
                                        const ProtectionPolicy& policy) {
  policy.validate();
  if (norms.empty()) throw ArgumentError("protection needs at least one channel");
  const double d = static_cast<double>(norms.size());
  ProtectionStats st;
  for (double v : norms) st.mean += v;
  st.mean /= d;
  double var = 0.0;
  for (double v : norms) var += (v - st.mean) * (v - st.mean);
  st.stddev = std::sqrt(var / d);
  st.threshold = st.mean + policy.threshold_sigma * st.stddev;
  const auto above = std::count_if(norms.begin(), norms.end(),
                                   [&](double v) { return v > st.threshold; });
  st.raw_fraction = static_cast<double>(above) / d;
  st.clamped_fraction = std::min(std::max(st.raw_fraction, policy.a), policy.b);
  st.count = ceil_fraction(st.clamped_fraction, norms.size());
  return st;
}

/// Protected set from precomputed channel norms: the `count` largest norms,
/// ties going to the lower index. Returned in ascending index order.
inline IndexSet protect_by_norms(std::span<const double> norms,
                                 const ProtectionPolicy& policy) {
  if (!policy.enabled) return {};
  const ProtectionStats st = protection_stats(norms, policy);
  std::vector<std::size_t> order(norms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });
  order.resize(st.count);
  std::sort(order.begin(), order.end());
  return IndexSet(std::move(order));
}

/// L2 norm of each key column.
inline std::vector<double> channel_norms(const ChannelMatrix& m) {
  std::vector<double> sq(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) sq[c] += row[c] * row[c];
  }
  for (double& v : sq) v = std::sqrt(v);
  return sq;
}

/// Salient key channels to shield from pruning; empty when disabled.
inline IndexSet protect_channels(const ChannelMatrix& k, const ProtectionPolicy& policy) {
  if (!policy.enabled) return {};
  return protect_by_norms(channel_norms(k), policy);
}

struct ScoreStep {
  std::size_t index = 0;
  double score = 0.0;
  friend bool operator==(const ScoreStep&, const ScoreStep&) = default;
};

struct PruneSelection {
  Selector selector = Selector::kMies;
  double lambda = 0.0;
  // ceil(lambda * d) before any clamping.
  std::size_t requested = 0;
  std::size_t n_prune = 0;
  // Set when protection left fewer than `requested` candidates.
  bool budget_clamped = false;
  IndexSet protected_set;
  // Ascending channel order; score_trace keeps the selection order.
  IndexSet pruned;
  std::vector<ScoreStep> score_trace;
  double error_sq = 0.0;
};

/// State handed to a MIES observer: after initialization (iteration 0) and
/// after the score update of each iteration.
///
/// scores[c] is the incremental error f(P + c) - f(P) of a candidate c.
/// pruned_error is f(P), accumulated from the chosen increments rather than
/// recomputed, so pruned_error + scores[c] is the running cumulative error.
struct MiesStep {
  std::size_t iteration = 0;
  std::span<const std::size_t> pruned;      // selection order
  std::span<const std::size_t> candidates;  // ascending
  std::span<const double> scores;           // indexed by channel, valid on candidates
  double pruned_error = 0.0;

  double cumulative_score(std::size_t c) const { return pruned_error + scores[c]; }
};

using MiesObserver = std::function<void(const MiesStep&)>;

namespace detail {

struct Budget {
  std::vector<std::size_t> candidates;  // unprotected, ascending
  std::size_t requested = 0;
  std::size_t n_prune = 0;
  bool clamped = false;
};

inline Budget make_budget(std::size_t d, double lambda, const IndexSet& protected_set) {
  protected_set.validate(d);
  Budget b;
  b.requested = prune_budget(lambda, d);
  const auto mask = protected_set.mask(d);
  for (std::size_t j = 0; j < d; ++j)
    if (!mask[j]) b.candidates.push_back(j);
  b.n_prune = std::min(b.requested, b.candidates.size());
  b.clamped = b.n_prune < b.requested;
  return b;
}

inline PruneSelection start_selection(Selector s, double lambda, const Budget& b,
                                      const IndexSet& protected_set) {
  PruneSelection sel;
  sel.selector = s;
  sel.lambda = lambda;
  sel.requested = b.requested;
  sel.n_prune = b.n_prune;
  sel.budget_clamped = b.clamped;
  sel.protected_set = protected_set.sorted();
  return sel;
}

inline void finish_selection(PruneSelection& sel, const InteractionGraph& g,
                             std::vector<std::size_t> chosen) {
  std::sort(chosen.begin(), chosen.end());
  sel.pruned = IndexSet(std::move(chosen));
  sel.error_sq = quadratic_form(g, sel.pruned);
}

}  // namespace detail

/// THINK channel scores ||q_j k_j^T||_F = ||q_j|| * ||k_j||.
inline std::vector<double> think_scores(const ChannelMatrix& q, const ChannelMatrix& k) {
  detail::require_same_width(q, k);
  const auto qn = channel_norms(q);
  const auto kn = channel_norms(k);
  std::vector<double> s(q.cols());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = qn[j] * kn[j];
  return s;
}

/// Prunes the n_prune lowest-scoring unprotected channels (ties: lower index
/// first). error_sq is evaluated on g.
inline PruneSelection think_select(const InteractionGraph& g, std::span<const double> scores,
                                   double lambda, const IndexSet& protected_set = {}) {
  if (scores.size() != g.dim()) throw ArgumentError("score count does not match graph width");
  const auto b = detail::make_budget(g.dim(), lambda, protected_set);
  auto sel = detail::start_selection(Selector::kThink, lambda, b, protected_set);
  std::vector<std::size_t> order = b.candidates;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return scores[x] < scores[y]; });
  order.resize(b.n_prune);
  for (std::size_t j : order) sel.score_trace.push_back({j, scores[j]});
  detail::finish_selection(sel, g, std::move(order));
  return sel;
}

inline PruneSelection think_select(const ChannelMatrix& q, const ChannelMatrix& k,
                                   double lambda, const IndexSet& protected_set = {}) {
  const auto g = build_interaction_graph(q, k);
  const auto scores = think_scores(q, k);
  return think_select(g, scores, lambda, protected_set);
}

/// Minimum incremental error selection on a prebuilt interaction graph.
///
/// Scores start at each channel's self-importance W_jj. Each iteration prunes
/// the lowest-scoring candidate j* (ties: lowest index) and adds the edge
/// weight 2 W_{k j*} to every remaining candidate k, so s_k is always the
/// error added by pruning k next. Protected channels never enter the
/// candidate set. O(d^2) total. score_trace records s_{j*} at selection; the
/// trace sums to the final error.
inline PruneSelection mies_select(const InteractionGraph& g, double lambda,
                                  const IndexSet& protected_set = {},
                                  const MiesObserver& observer = nullptr) {
  const std::size_t d = g.dim();
  const auto b = detail::make_budget(d, lambda, protected_set);
  auto sel = detail::start_selection(Selector::kMies, lambda, b, protected_set);

  std::vector<std::size_t> candidates = b.candidates;
  std::vector<std::size_t> pruned;
  pruned.reserve(b.n_prune);
  std::vector<double> scores(d, 0.0);
  for (std::size_t j : candidates) scores[j] = g(j, j);

  double pruned_error = 0.0;
  auto notify = [&](std::size_t t) {
    if (observer) observer(MiesStep{t, pruned, candidates, scores, pruned_error});
  };
  notify(0);

  for (std::size_t t = 1; t <= b.n_prune; ++t) {
    auto best = candidates.begin();
    for (auto it = candidates.begin(); it != candidates.end(); ++it)
      if (scores[*it] < scores[*best]) best = it;
    const std::size_t chosen = *best;
    sel.score_trace.push_back({chosen, scores[chosen]});
    pruned_error += scores[chosen];
    pruned.push_back(chosen);
    candidates.erase(best);
    for (std::size_t c : candidates) scores[c] += 2.0 * g(c, chosen);
    notify(t);
  }
  detail::finish_selection(sel, g, std::move(pruned));
  return sel;
}

inline PruneSelection mies_select(const ChannelMatrix& q, const ChannelMatrix& k,
                                  double lambda, const IndexSet& protected_set = {},
                                  const MiesObserver& observer = nullptr) {
  return mies_select(build_interaction_graph(q, k), lambda, protected_set, observer);
}

/// Exhaustive minimum of f over every feasible pruned set. Ties resolve to
/// the lexicographically smallest set. Throws CapacityError above cap.
inline PruneSelection oracle_select(const InteractionGraph& g, double lambda,
                                    const IndexSet& protected_set = {},
                                    std::uint64_t cap = kDefaultEnumerationCap) {
  const auto b = detail::make_budget(g.dim(), lambda, protected_set);
  if (binomial_capped(b.candidates.size(), b.n_prune, cap) > cap) {
    throw CapacityError("oracle would enumerate more than " + std::to_string(cap) +
                        " subsets (C(" + std::to_string(b.candidates.size()) + ", " +
                        std::to_string(b.n_prune) + "))");
  }
  auto sel = detail::start_selection(Selector::kOracle, lambda, b, protected_set);
  std::vector<std::size_t> best;
  double best_f = std::numeric_limits<double>::infinity();
  for_each_combination(std::span<const std::size_t>(b.candidates), b.n_prune,
                       [&](std::span<const std::size_t> s) {
                         const double f = quadratic_form(g, s);
                         if (f < best_f) {
                           best_f = f;
                           best.assign(s.begin(), s.end());
                         }
                       });
  detail::finish_selection(sel, g, std::move(best));
  return sel;
}

inline PruneSelection oracle_select(const ChannelMatrix& q, const ChannelMatrix& k,
                                    double lambda, const IndexSet& protected_set = {},
                                    std::uint64_t cap = kDefaultEnumerationCap) {
  return oracle_select(build_interaction_graph(q, k), lambda, protected_set, cap);
}

/// Uniformly random n_prune unprotected channels, reproducible from seed.
inline PruneSelection random_select(const InteractionGraph& g, double lambda,
                                    const IndexSet& protected_set, std::uint64_t seed) {
  const auto b = detail::make_budget(g.dim(), lambda, protected_set);
  auto sel = detail::start_selection(Selector::kRandom, lambda, b, protected_set);
  std::vector<std::size_t> pool = b.candidates;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < b.n_prune; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(b.n_prune);
  detail::finish_selection(sel, g, std::move(pool));
  return sel;
}

inline PruneSelection random_select(const ChannelMatrix& q, const ChannelMatrix& k,
                                    double lambda, const IndexSet& protected_set,
                                    std::uint64_t seed) {
  return random_select(build_interaction_graph(q, k), lambda, protected_set, seed);
}

/// Runs one selector on (q, k). `seed` only affects RANDOM.
inline PruneSelection select_channels(Selector selector, const ChannelMatrix& q,
                                      const ChannelMatrix& k, double lambda,
                                      const IndexSet& protected_set, std::uint64_t seed,
                                      std::uint64_t cap = kDefaultEnumerationCap) {
  const auto g = build_interaction_graph(q, k);
  switch (selector) {
    case Selector::kMies: return mies_select(g, lambda, protected_set);
    case Selector::kThink: return think_select(g, think_scores(q, k), lambda, protected_set);
    case Selector::kRandom: return random_select(g, lambda, protected_set, seed);
    case Selector::kOracle: return oracle_select(g, lambda, protected_set, cap);
  }
  throw ArgumentError("unknown selector");
}

}  // namespace chanprune

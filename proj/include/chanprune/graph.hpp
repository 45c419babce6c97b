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
#include <limits>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "chanprune/combinatorics.hpp"
#include "chanprune/core.hpp"
#include "chanprune/error.hpp"
#include "chanprune/jacobi.hpp"

namespace chanprune {

inline constexpr std::uint64_t kDefaultEnumerationCap = 2'000'000;

/// Complete weighted channel graph, stored as the dense symmetric matrix
///   W_ij = (q_i . q_j) * (k_i . k_j).
///
/// W_ii is the node weight ||q_i k_i^T||_F^2. Off-diagonal entries hold half
/// the edge weight; summing over ordered pairs counts each edge twice, so the
/// error of a pruned set S is exactly 1_S^T W 1_S. W is the Hadamard product
/// of the two Gram matrices and therefore positive semi-definite.
class InteractionGraph {
 public:
  /// Wraps an existing d x d row-major matrix without checking symmetry.
  /// Used for hand-built fixtures and fault injection; see is_symmetric().
  static InteractionGraph from_matrix(std::size_t dim, std::vector<double> values) {
    if (dim == 0 || values.size() != dim * dim) {
      throw ArgumentError("InteractionGraph needs a non-empty square matrix");
    }
    return InteractionGraph(dim, std::move(values));
  }

  std::size_t dim() const noexcept { return dim_; }

  double operator()(std::size_t i, std::size_t j) const noexcept {
    return w_[i * dim_ + j];
  }

  double weight(std::size_t i, std::size_t j) const {
    if (i >= dim_ || j >= dim_) throw ArgumentError("graph index out of range");
    return w_[i * dim_ + j];
  }

  std::span<const double> values() const noexcept { return w_; }

  bool is_symmetric() const noexcept {
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = i + 1; j < dim_; ++j)
        if (w_[i * dim_ + j] != w_[j * dim_ + i]) return false;
    return true;
  }

  double frobenius_norm() const noexcept {
    double s = 0.0;
    for (double v : w_) s += v * v;
    return std::sqrt(s);
  }

  /// Principal submatrix on the given indices, row-major.
  std::vector<double> principal_submatrix(std::span<const std::size_t> idx) const {
    std::vector<double> sub(idx.size() * idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = 0; b < idx.size(); ++b)
        sub[a * idx.size() + b] = w_[idx[a] * dim_ + idx[b]];
    return sub;
  }

 private:
  InteractionGraph(std::size_t dim, std::vector<double> w) : dim_(dim), w_(std::move(w)) {}

  std::size_t dim_;
  std::vector<double> w_;
};

namespace detail {

// Upper triangle of m^T m, mirrored.
inline std::vector<double> column_gram(const ChannelMatrix& m) {
  const std::size_t d = m.cols();
  std::vector<double> g(d * d, 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      const double ri = row[i];
      if (ri == 0.0) continue;
      for (std::size_t j = i; j < d; ++j) g[i * d + j] += ri * row[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) g[j * d + i] = g[i * d + j];
  return g;
}

}  // namespace detail

/// Builds W from the query observation window and the key cache via their
/// column Gram matrices, O(d^2 (L + L_obs)).
inline InteractionGraph build_interaction_graph(const ChannelMatrix& q,
                                                const ChannelMatrix& k) {
  detail::require_same_width(q, k);
  const std::size_t d = q.cols();
  const auto gq = detail::column_gram(q);
  const auto gk = detail::column_gram(k);
  std::vector<double> w(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      w[i * d + j] = gq[i * d + j] * gk[i * d + j];
      w[j * d + i] = w[i * d + j];
    }
  }
  return InteractionGraph::from_matrix(d, std::move(w));
}

/// Pruning error written as self-importance plus cross-channel interaction:
///   sum_{i in P} W_ii + sum_{i in P} sum_{j in P, j != i} W_ij.
inline double decomposed_error_sq(const InteractionGraph& g, const IndexSet& pruned) {
  pruned.validate(g.dim());
  double self = 0.0;
  double cross = 0.0;
  for (std::size_t i : pruned) {
    self += g(i, i);
    for (std::size_t j : pruned)
      if (j != i) cross += g(i, j);
  }
  return self + cross;
}

/// f(S) = 1_S^T W 1_S, summed over ordered pairs in S.
inline double quadratic_form(const InteractionGraph& g, std::span<const std::size_t> s) {
  double total = 0.0;
  for (std::size_t i : s) {
    if (i >= g.dim()) throw ArgumentError("quadratic_form: index out of range");
    for (std::size_t j : s) total += g(i, j);
  }
  return total;
}

inline double quadratic_form(const InteractionGraph& g, const IndexSet& s) {
  return quadratic_form(g, std::span<const std::size_t>(s.indices()));
}

/// Smallest eigenvalue of the full W.
inline double min_eigenvalue(const InteractionGraph& g) {
  return symmetric_eigenvalues(g.values(), g.dim()).front();
}

/// Extremal eigenvalues of W restricted to supports of size k.
struct EigenCertificate {
  std::size_t k = 0;
  double mu_min = 0.0;
  double mu_max = 0.0;
  // mu_max / mu_min; +inf when mu_min <= 0 (kappa_infinite is then set).
  double kappa = std::numeric_limits<double>::infinity();
  bool kappa_infinite = true;
  std::uint64_t subsets_evaluated = 0;
  // False when obtained by sampling; mu_min/mu_max are then inner estimates.
  bool exact = true;
};

namespace detail {

inline void finish_certificate(EigenCertificate& cert) {
  // Jacobi round-off can leave a PSD minimum a hair below zero.
  if (cert.mu_min < 0.0) cert.mu_min = 0.0;
  if (cert.mu_max < cert.mu_min) cert.mu_max = cert.mu_min;
  cert.kappa_infinite = !(cert.mu_min > 0.0);
  cert.kappa = cert.kappa_infinite ? std::numeric_limits<double>::infinity()
                                   : cert.mu_max / cert.mu_min;
}

inline void check_support_size(const InteractionGraph& g, std::size_t k) {
  if (k < 1 || k > g.dim()) {
    throw ArgumentError("support size " + std::to_string(k) + " outside [1, " +
                        std::to_string(g.dim()) + "]");
  }
}

}  // namespace detail

/// Exact restricted eigenvalues: min over all size-k supports S of
/// lambda_min(W_S) and max of lambda_max(W_S).
///
/// Enumeration is split by the first index of each support across `workers`
/// threads and merged by min/max, so the result does not depend on the
/// worker count. Throws CapacityError when C(d, k) exceeds cap; use
/// restricted_eigenvalues_sampled() in that regime.
inline EigenCertificate restricted_eigenvalues(const InteractionGraph& g, std::size_t k,
                                               std::uint64_t cap = kDefaultEnumerationCap,
                                               unsigned workers = 1) {
  detail::check_support_size(g, k);
  const std::size_t d = g.dim();
  const std::uint64_t count = binomial_capped(d, k, cap);
  if (count > cap) {
    throw CapacityError("C(" + std::to_string(d) + ", " + std::to_string(k) +
                        ") exceeds the enumeration cap of " + std::to_string(cap) +
                        " subsets; use sampled mode");
  }

  struct Partial {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::uint64_t n = 0;
  };

  // Supports whose smallest index is `first`.
  auto scan_first = [&](std::size_t first, Partial& part) {
    std::vector<std::size_t> rest;
    for (std::size_t j = first + 1; j < d; ++j) rest.push_back(j);
    std::vector<std::size_t> support(k);
    support[0] = first;
    for_each_combination(std::span<const std::size_t>(rest), k - 1,
                         [&](std::span<const std::size_t> tail) {
                           std::copy(tail.begin(), tail.end(), support.begin() + 1);
                           const auto eig = symmetric_eigenvalues(
                               g.principal_submatrix(support), k);
                           part.lo = std::min(part.lo, eig.front());
                           part.hi = std::max(part.hi, eig.back());
                           ++part.n;
                         });
  };

  workers = std::max(1u, workers);
  std::vector<Partial> partials(workers);
  auto run = [&](unsigned w) {
    for (std::size_t first = w; first + k <= d; first += workers) scan_first(first, partials[w]);
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }

  EigenCertificate cert;
  cert.k = k;
  cert.mu_min = std::numeric_limits<double>::infinity();
  cert.mu_max = -std::numeric_limits<double>::infinity();
  for (const auto& p : partials) {
    cert.mu_min = std::min(cert.mu_min, p.lo);
    cert.mu_max = std::max(cert.mu_max, p.hi);
    cert.subsets_evaluated += p.n;
  }
  detail::finish_certificate(cert);
  return cert;
}

/// Restricted eigenvalue estimates from `samples` uniformly drawn size-k
/// supports. The reported interval is contained in the exact one.
inline EigenCertificate restricted_eigenvalues_sampled(const InteractionGraph& g,
                                                       std::size_t k,
                                                       std::uint64_t samples,
                                                       std::uint64_t seed) {
  detail::check_support_size(g, k);
  if (samples == 0) throw ArgumentError("sampled mode needs at least one sample");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(g.dim());
  EigenCertificate cert;
  cert.k = k;
  cert.exact = false;
  cert.mu_min = std::numeric_limits<double>::infinity();
  cert.mu_max = -std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    // Partial Fisher-Yates: the first k slots form a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, perm.size() - 1);
      std::swap(perm[i], perm[pick(rng)]);
    }
    std::vector<std::size_t> support(perm.begin(), perm.begin() + static_cast<long>(k));
    std::sort(support.begin(), support.end());
    const auto eig = symmetric_eigenvalues(g.principal_submatrix(support), k);
    cert.mu_min = std::min(cert.mu_min, eig.front());
    cert.mu_max = std::max(cert.mu_max, eig.back());
  }
  cert.subsets_evaluated = samples;
  detail::finish_certificate(cert);
  return cert;
}

}  // namespace chanprune

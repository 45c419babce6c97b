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
#include <string>
#include <vector>

#include "chanprune/core.hpp"
#include "chanprune/error.hpp"
#include "chanprune/prune.hpp"

namespace chanprune {

/// Parameters of the synthetic query/key generator.
///
/// Channel scales are lognormal with a planted fraction of outlier channels
/// boosted by outlier_scale, so a few key channels hold most of the energy.
/// Query channel means are proportional to the scale and query noise is
/// proportional to the mean, so high-mean channels are also high-variance.
/// Future queries add a per-channel mean shift of drift_gamma * |mean|.
struct SyntheticSpec {
  std::size_t d = 64;
  std::size_t L = 128;
  std::size_t L_obs = 32;
  std::size_t L_future = 32;
  double outlier_fraction = 0.05;
  double outlier_scale = 10.0;
  // Noise std and mean shift, both as a multiple of |channel mean|.
  double drift_gamma = 0.5;
  double scale_log_mean = 0.0;
  double scale_log_std = 0.25;
  std::uint64_t seed = 0;

  void validate() const {
    if (d == 0 || L == 0 || L_obs == 0 || L_future == 0) {
      throw ArgumentError("synthetic spec counts must all be >= 1");
    }
    if (L_obs > L) throw ArgumentError("L_obs must not exceed L");
    if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
      throw ArgumentError("outlier_fraction must lie in [0, 1]");
    }
    if (!(outlier_scale > 0.0) || !std::isfinite(outlier_scale)) {
      throw ArgumentError("outlier_scale must be finite and > 0");
    }
    if (!(drift_gamma >= 0.0) || !std::isfinite(drift_gamma)) {
      throw ArgumentError("drift_gamma must be finite and >= 0");
    }
    if (!(scale_log_std >= 0.0) || !std::isfinite(scale_log_std) ||
        !std::isfinite(scale_log_mean)) {
      throw ArgumentError("lognormal scale parameters must be finite, std >= 0");
    }
  }
};

struct SyntheticInstance {
  ChannelMatrix q_obs;
  ChannelMatrix k;
  ChannelMatrix q_future;
  // Channels whose scale was multiplied by outlier_scale.
  IndexSet planted;
  // Final per-channel scale c_j (after outlier boost).
  std::vector<double> scales;
};

/// Draws one instance; a pure function of spec (including its seed).
inline SyntheticInstance generate_instance(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t d = spec.d;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  std::vector<double> scales(d);
  for (double& c : scales) c = std::exp(spec.scale_log_mean + spec.scale_log_std * std_normal(rng));

  std::vector<std::size_t> perm(d);
  for (std::size_t j = 0; j < d; ++j) perm[j] = j;
  const std::size_t n_outliers = ceil_fraction(spec.outlier_fraction, d);
  for (std::size_t i = 0; i < n_outliers; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, d - 1);
    std::swap(perm[i], perm[pick(rng)]);
  }
  std::vector<std::size_t> planted(perm.begin(), perm.begin() + static_cast<long>(n_outliers));
  std::sort(planted.begin(), planted.end());
  for (std::size_t j : planted) scales[j] *= spec.outlier_scale;

  std::vector<double> mean(d);
  std::vector<double> shift(d);
  for (std::size_t j = 0; j < d; ++j) mean[j] = coin(rng) ? scales[j] : -scales[j];
  for (std::size_t j = 0; j < d; ++j) {
    const double magnitude = spec.drift_gamma * std::abs(mean[j]);
    shift[j] = coin(rng) ? magnitude : -magnitude;
  }

  std::vector<double> kdata(spec.L * d);
  for (std::size_t r = 0; r < spec.L; ++r)
    for (std::size_t j = 0; j < d; ++j) kdata[r * d + j] = scales[j] * std_normal(rng);

  auto draw_queries = [&](std::size_t rows, bool drifted) {
    std::vector<double> data(rows * d);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        const double noise = spec.drift_gamma * std::abs(mean[j]) * std_normal(rng);
        data[r * d + j] = mean[j] + (drifted ? shift[j] : 0.0) + noise;
      }
    }
    return ChannelMatrix(rows, d, std::move(data));
  };
  ChannelMatrix q_obs = draw_queries(spec.L_obs, false);
  ChannelMatrix q_future = draw_queries(spec.L_future, true);

  return SyntheticInstance{std::move(q_obs), ChannelMatrix(spec.L, d, std::move(kdata)),
                           std::move(q_future), IndexSet(std::move(planted)),
                           std::move(scales)};
}

struct DriftResult {
  Selector selector = Selector::kMies;
  bool protection_enabled = false;
  // ||Q S_p K^T||_F / ||Q K^T||_F on the observation window and future probes.
  double error_obs = 0.0;
  double error_future = 0.0;
  // error_future / error_obs; +inf with ratio_infinite set when error_obs == 0.
  double ratio = 0.0;
  bool ratio_infinite = false;
  // The one selection both errors were measured with.
  PruneSelection selection;
};

/// Relative reconstruction error of `pruned` under probe queries q.
inline double relative_error(const ChannelMatrix& q, const ChannelMatrix& k,
                             const IndexSet& pruned) {
  const double denom = attention_energy_sq(q, k);
  if (denom == 0.0) {
    throw DegenerateInputError("attention product is identically zero");
  }
  return std::sqrt(reconstruction_error_sq(q, k, pruned) / denom);
}

/// Selects channels on (q_obs, k) once, then measures the same pruned set
/// against both the observation window and the future queries.
inline DriftResult drift_evaluate(const ChannelMatrix& q_obs, const ChannelMatrix& k,
                                  const ChannelMatrix& q_future, Selector selector,
                                  double lambda, const ProtectionPolicy& policy,
                                  std::uint64_t seed = 0) {
  detail::require_same_width(q_obs, k);
  detail::require_same_width(q_future, k);
  const IndexSet protected_set = protect_channels(k, policy);
  DriftResult out;
  out.selector = selector;
  out.protection_enabled = policy.enabled;
  out.selection = select_channels(selector, q_obs, k, lambda, protected_set, seed);
  out.error_obs = relative_error(q_obs, k, out.selection.pruned);
  out.error_future = relative_error(q_future, k, out.selection.pruned);
  if (out.error_obs == 0.0) {
    out.ratio = std::numeric_limits<double>::infinity();
    out.ratio_infinite = true;
  } else {
    out.ratio = out.error_future / out.error_obs;
  }
  return out;
}

}  // namespace chanprune

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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace chanprune {

/// C(n, k), saturating at cap + 1 so callers can compare against a cap
/// without overflow.
inline std::uint64_t binomial_capped(std::size_t n, std::size_t k, std::uint64_t cap) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i stays integral at every step.
    const unsigned __int128 next =
        static_cast<unsigned __int128>(result) * (n - k + i) / i;
    if (next > cap) return cap + 1;
    result = static_cast<std::uint64_t>(next);
  }
  return result;
}

/// Calls fn(std::span<const std::size_t>) for every k-subset of pool in
/// lexicographic order of positions. pool order is preserved inside each
/// subset, so a sorted pool yields lexicographically sorted subsets.
template <typename Fn>
void for_each_combination(std::span<const std::size_t> pool, std::size_t k, Fn&& fn) {
  const std::size_t n = pool.size();
  if (k > n) return;
  std::vector<std::size_t> pos(k);
  std::vector<std::size_t> subset(k);
  for (std::size_t i = 0; i < k; ++i) pos[i] = i;
  while (true) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = pool[pos[i]];
    fn(std::span<const std::size_t>(subset));
    // Advance the rightmost position that still has room.
    std::size_t i = k;
    while (i > 0 && pos[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) return;
    ++pos[i - 1];
    for (std::size_t j = i; j < k; ++j) pos[j] = pos[j - 1] + 1;
  }
}

}  // namespace chanprune

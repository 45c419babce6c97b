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
#include <span>
#include <vector>

#include "chanprune/error.hpp"

namespace chanprune {

struct JacobiOptions {
  // Stop once the off-diagonal Frobenius norm drops to this fraction of the
  // whole matrix's Frobenius norm.
  double off_diagonal_tolerance = 1e-10;
  int max_sweeps = 100;
};

/// Eigenvalues of a symmetric n x n matrix (row-major), ascending.
///
/// Cyclic Jacobi: sweeps the strict upper triangle in row order and zeroes each
/// pivot with one plane rotation. Only the upper triangle is read; the lower
/// one is assumed to mirror it. Sweep order is fixed, so results are
/// reproducible bit for bit on a given platform.
inline std::vector<double> symmetric_eigenvalues(std::span<const double> matrix,
                                                 std::size_t n,
                                                 const JacobiOptions& opts = {}) {
  if (matrix.size() != n * n) {
    throw ArgumentError("symmetric_eigenvalues: expected n*n entries");
  }
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      a[i * n + j] = matrix[i * n + j];
      a[j * n + i] = matrix[i * n + j];
    }
  }
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };

  double total_sq = 0.0;
  for (double v : a) total_sq += v * v;
  const double threshold_sq =
      opts.off_diagonal_tolerance * opts.off_diagonal_tolerance * total_sq;

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double off_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off_sq += 2.0 * at(i, j) * at(i, j);
    if (off_sq <= threshold_sq) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        at(p, p) -= t * apq;
        at(q, q) += t * apq;
        at(p, q) = 0.0;
        at(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = at(r, p);
          const double arq = at(r, q);
          at(r, p) = arp - s * (arq + tau * arp);
          at(p, r) = at(r, p);
          at(r, q) = arq + s * (arp - tau * arq);
          at(q, r) = at(r, q);
        }
      }
    }
  }

  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = at(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

}  // namespace chanprune

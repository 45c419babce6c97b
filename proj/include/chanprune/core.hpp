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
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chanprune/error.hpp"

namespace chanprune {

/// Dense real matrix whose columns are channels and whose rows are tokens.
///
/// Used for both the query observation window (L_obs x d) and the key cache
/// (L x d). Storage is row-major. Instances are immutable once built and every
/// entry is finite.
class ChannelMatrix {
 public:
  ChannelMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows_ == 0 || cols_ == 0) {
      throw ArgumentError("ChannelMatrix needs at least one row and column");
    }
    if (data_.size() != rows_ * cols_) {
      throw ArgumentError("ChannelMatrix data has " +
                          std::to_string(data_.size()) + " values, expected " +
                          std::to_string(rows_ * cols_));
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) {
        if (!std::isfinite(data_[r * cols_ + c])) {
          throw ValidationError("non-finite value at row " + std::to_string(r) +
                                ", col " + std::to_string(c));
        }
      }
    }
  }

  /// Builds a matrix from a list of columns, each holding one value per row.
  static ChannelMatrix from_columns(
      const std::vector<std::vector<double>>& columns) {
    if (columns.empty() || columns.front().empty()) {
      throw ArgumentError("from_columns needs at least one non-empty column");
    }
    const std::size_t rows = columns.front().size();
    std::vector<double> data(rows * columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c].size() != rows) {
        throw ArgumentError("from_columns: ragged column " + std::to_string(c));
      }
      for (std::size_t r = 0; r < rows; ++r) data[r * columns.size() + c] = columns[c][r];
    }
    return ChannelMatrix(rows, columns.size(), std::move(data));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  double at(std::size_t r, std::size_t c) const {
    if (r >= rows_ || c >= cols_) throw ArgumentError("matrix index out of range");
    return data_[r * cols_ + c];
  }

  std::span<const double> row(std::size_t r) const {
    if (r >= rows_) throw ArgumentError("row index out of range");
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> column(std::size_t c) const {
    if (c >= cols_) throw ArgumentError("column index out of range");
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = data_[r * cols_ + c];
    return out;
  }

  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const ChannelMatrix&, const ChannelMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

/// Ordered list of distinct channel indices.
///
/// Range validity against a channel count is checked at the point of use,
/// since the set itself does not know the width it refers to.
class IndexSet {
 public:
  IndexSet() = default;

  explicit IndexSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
    std::vector<std::size_t> sorted = indices_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ArgumentError("IndexSet contains duplicate indices");
    }
  }

  IndexSet(std::initializer_list<std::size_t> indices)
      : IndexSet(std::vector<std::size_t>(indices)) {}

  /// Throws ArgumentError if any index is >= dim.
  void validate(std::size_t dim) const {
    for (std::size_t i : indices_) {
      if (i >= dim) {
        throw ArgumentError("channel index " + std::to_string(i) +
                            " out of range for width " + std::to_string(dim));
      }
    }
  }

  bool contains(std::size_t i) const {
    return std::find(indices_.begin(), indices_.end(), i) != indices_.end();
  }

  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }

  IndexSet sorted() const {
    std::vector<std::size_t> s = indices_;
    std::sort(s.begin(), s.end());
    return IndexSet(std::move(s));
  }

  /// Membership mask of length dim.
  std::vector<bool> mask(std::size_t dim) const {
    validate(dim);
    std::vector<bool> m(dim, false);
    for (std::size_t i : indices_) m[i] = true;
    return m;
  }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<std::size_t> indices_;
};

/// Inner product of columns i and j of m.
inline double column_dot(const ChannelMatrix& m, std::size_t i, std::size_t j) {
  if (i >= m.cols() || j >= m.cols()) {
    throw ArgumentError("column_dot: index out of range");
  }
  double acc = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) acc += m(r, i) * m(r, j);
  return acc;
}

namespace detail {

inline void require_same_width(const ChannelMatrix& q, const ChannelMatrix& k) {
  if (q.cols() != k.cols()) {
    throw ArgumentError("width mismatch: " + std::to_string(q.cols()) + " vs " +
                        std::to_string(k.cols()) + " channels");
  }
}

}  // namespace detail

/// ||Q K^T - Q S K^T||_F^2 evaluated directly: forms the residual
/// sum_{i in pruned} q_i k_i^T entry by entry and squares it.
inline double reconstruction_error_sq(const ChannelMatrix& q, const ChannelMatrix& k,
                                      const IndexSet& pruned) {
  detail::require_same_width(q, k);
  pruned.validate(q.cols());
  double total = 0.0;
  for (std::size_t a = 0; a < q.rows(); ++a) {
    for (std::size_t b = 0; b < k.rows(); ++b) {
      double entry = 0.0;
      for (std::size_t c : pruned) entry += q(a, c) * k(b, c);
      total += entry * entry;
    }
  }
  return total;
}

/// ||Q K^T||_F^2, the pre-pruning attention logit energy.
inline double attention_energy_sq(const ChannelMatrix& q, const ChannelMatrix& k) {
  detail::require_same_width(q, k);
  double total = 0.0;
  for (std::size_t a = 0; a < q.rows(); ++a) {
    for (std::size_t b = 0; b < k.rows(); ++b) {
      double entry = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) entry += q(a, c) * k(b, c);
      total += entry * entry;
    }
  }
  return total;
}

/// ceil(fraction * d) for fraction in [0, 1].
///
/// A relative slack of a few ulps absorbs products like 0.7*10 that land just
/// above an integer.
inline std::size_t ceil_fraction(double fraction, std::size_t d) {
  const double exact = fraction * static_cast<double>(d);
  const double nearest = std::round(exact);
  if (std::abs(exact - nearest) <= 1e-9 * std::max(1.0, nearest)) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::ceil(exact));
}

/// Number of channels removed at ratio lambda over d channels: ceil(lambda*d).
inline std::size_t prune_budget(double lambda, std::size_t d) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ArgumentError("pruning ratio must lie in [0, 1]");
  }
  return ceil_fraction(lambda, d);
}

}  // namespace chanprune

// Copyright 2026 The DPMS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "dpms/core_data.hpp"
#include "dpms/error.hpp"

namespace dpms {

inline constexpr int kMaxEnumerableCovariates = 24;

// An ordered, duplicate-free collection of candidate models over d columns.
class CandidateSet {
 public:
  CandidateSet(std::vector<ModelMask> masks, int d) : masks_(std::move(masks)), d_(d) {
    if (d < 1 || d > kMaxCovariates) {
      throw ConfigError("candidate dimension must lie in [1, 64]");
    }
    std::unordered_set<ModelMask, ModelMaskHash> seen;
    for (ModelMask m : masks_) {
      if (m.width() > d_) throw ConfigError("model mask does not fit in d columns");
      if (!seen.insert(m).second) throw ConfigError("duplicate candidate model");
      max_size_ = std::max(max_size_, m.size());
    }
  }

  const std::vector<ModelMask>& masks() const { return masks_; }
  int d() const { return d_; }
  // Largest model size in the collection.
  int max_size() const { return max_size_; }
  std::size_t size() const { return masks_.size(); }
  bool empty() const { return masks_.empty(); }
  auto begin() const { return masks_.begin(); }
  auto end() const { return masks_.end(); }

 private:
  std::vector<ModelMask> masks_;
  int d_;
  int max_size_ = 0;
};

// Every subset of {0..d-1} with at most max_size members, ordered by
// cardinality and then numeric bit value.
inline CandidateSet all_subsets(int d, bool include_empty,
                                std::optional<int> max_size = std::nullopt) {
  if (d < 1 || d > kMaxEnumerableCovariates) {
    throw ConfigError("exhaustive enumeration supports 1 <= d <= 24, got d = " +
                      std::to_string(d) +
                      "; pass an explicit list or a size bound instead");
  }
  const int cap = max_size.value_or(d);
  if (cap < 0 || cap > d) throw ConfigError("max_size must lie in [0, d]");

  std::vector<ModelMask> out;
  if (include_empty) out.emplace_back(0);
  const std::uint64_t limit = std::uint64_t{1} << d;
  for (int k = 1; k <= cap; ++k) {
    // Gosper's hack walks k-subsets in increasing numeric order.
    std::uint64_t v = (std::uint64_t{1} << k) - 1;
    while (v < limit) {
      out.emplace_back(v);
      const std::uint64_t t = v | (v - 1);
      v = (t + 1) | (((~t & (t + 1)) - 1) >> (std::countr_zero(v) + 1));
    }
  }
  return CandidateSet(std::move(out), d);
}

// Builds a set from 1-based index lists, dropping repeats (first one wins).
inline CandidateSet from_explicit(const std::vector<std::vector<int>>& index_sets,
                                  int d) {
  if (d < 1 || d > kMaxCovariates) {
    throw ConfigError("candidate dimension must lie in [1, 64]");
  }
  std::vector<ModelMask> out;
  std::unordered_set<ModelMask, ModelMaskHash> seen;
  for (const auto& set : index_sets) {
    std::uint64_t bits = 0;
    for (int idx : set) {
      if (idx < 1 || idx > d) {
        throw ConfigError("model index " + std::to_string(idx) +
                          " outside [1, " + std::to_string(d) + "]");
      }
      bits |= std::uint64_t{1} << (idx - 1);
    }
    const ModelMask m(bits);
    if (seen.insert(m).second) out.push_back(m);
  }
  return CandidateSet(std::move(out), d);
}

}  // namespace dpms

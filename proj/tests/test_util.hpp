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

#include "dpms/core_data.hpp"
#include "dpms/rng.hpp"

namespace dpms::testing {

// Uniform[-1, 1] design with response Y = X beta + noise, clipped to [-r, r].
inline Dataset random_dataset(std::uint64_t seed, Eigen::Index n, int d,
                              double r = 1.0, double noise = 0.3) {
  RngStream rng(seed, 1);
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = 2.0 * rng.uniform() - 1.0;
  }
  Vector beta(d);
  for (int j = 0; j < d; ++j) beta(j) = 2.0 * rng.uniform() - 1.0;
  Vector y = x * beta / static_cast<double>(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) += noise * (2.0 * rng.uniform() - 1.0);
    y(i) = std::clamp(y(i), -r, r);
  }
  return Dataset(std::move(x), std::move(y), r);
}

}  // namespace dpms::testing

namespace dpms::testing {

struct AdjacentPair {
  Dataset d;
  Dataset d_prime;
};

// Two datasets that differ only in their last row. Entries are pushed to
// the bounds part of the time, and responses are drawn away from zero so
// that residual sums exceed (r + R)^2 often enough to exercise the local
// sensitivity bound.
inline AdjacentPair adjacent_pair(std::uint64_t seed, Eigen::Index n, int d, double r) {
  RngStream rng(seed, 77);
  const auto draw_x = [&rng]() {
    const double u = rng.uniform();
    if (u < 0.15) return -1.0;
    if (u < 0.30) return 1.0;
    return 2.0 * rng.uniform() - 1.0;
  };
  const auto draw_y = [&rng, r]() {
    const double mag = r * (rng.uniform() < 0.5 ? 1.0 : 0.5 + 0.5 * rng.uniform());
    return rng.uniform() < 0.5 ? -mag : mag;
  };
  Matrix x(n, d);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = draw_x();
    y(i) = draw_y();
  }
  Matrix x2 = x;
  Vector y2 = y;
  for (int j = 0; j < d; ++j) x2(n - 1, j) = draw_x();
  y2(n - 1) = draw_y();
  return {Dataset(std::move(x), std::move(y), r), Dataset(std::move(x2), std::move(y2), r)};
}

}  // namespace dpms::testing

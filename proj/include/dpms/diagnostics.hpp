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

#include <cmath>
#include <cstdint>
#include <limits>

#include <Eigen/Eigenvalues>

#include "dpms/core_data.hpp"
#include "dpms/enumeration.hpp"
#include "dpms/error.hpp"

namespace dpms {

inline constexpr long long kExactKappaMaskLimit = 4096;

struct KappaEstimate {
  double kappa0 = 0.0;
  int max_size = 0;
  // True when the infimum was taken over every support of size max_size;
  // false when the full-matrix minimum eigenvalue was used as a lower bound.
  bool exact = false;
  long long supports_examined = 0;
};

inline long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long out = 1;
  for (int i = 1; i <= k; ++i) {
    out = out * (n - k + i) / i;
    if (out > (1LL << 40)) return out;
  }
  return out;
}

inline double min_eigenvalue(const Matrix& a) {
  if (a.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

// Sparse minimum eigenvalue of the sample covariance X^T X / n over supports
// of size max_size. Smaller supports never have a smaller minimum eigenvalue
// (Cauchy interlacing), so only the largest size is scanned.
inline KappaEstimate estimate_kappa0(const SufficientStats& stats, int max_size) {
  const int d = stats.d();
  if (max_size < 1 || max_size > d) throw ConfigError("max_size must lie in [1, d]");
  const Matrix sigma = stats.xtx / static_cast<double>(stats.n);
  KappaEstimate est;
  est.max_size = max_size;
  const long long count = binomial(d, max_size);
  if (count <= kExactKappaMaskLimit && d <= kMaxEnumerableCovariates) {
    est.exact = true;
    est.kappa0 = std::numeric_limits<double>::infinity();
    const CandidateSet supports = all_subsets(d, false, max_size);
    for (ModelMask m : supports) {
      if (m.size() != max_size) continue;
      SufficientStats sub = restrict(stats, m);
      est.kappa0 = std::min(est.kappa0, min_eigenvalue(sub.xtx / static_cast<double>(stats.n)));
      ++est.supports_examined;
    }
  } else {
    est.kappa0 = min_eigenvalue(sigma);
    est.supports_examined = 1;
  }
  return est;
}

// Radius above which the l1 constraint cannot bind for any candidate of size
// at most max_size: r * sqrt(max_size / kappa0).
inline double inactive_radius(double r, int max_size, double kappa0) {
  if (!(kappa0 > 0)) return std::numeric_limits<double>::infinity();
  return r * std::sqrt(static_cast<double>(max_size) / kappa0);
}

}  // namespace dpms

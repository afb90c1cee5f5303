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
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "dpms/core_data.hpp"
#include "dpms/error.hpp"

namespace dpms {

enum class StepRule { kFixedInverseLipschitz, kBacktracking };

struct SolverConfig {
  int max_iterations = 10000;
  // Relative objective decrease below which the iteration may stop.
  double tolerance = 1e-10;
  // Infinity-norm iterate change (relative to 1 + |beta|_inf) that must also
  // be reached. The objective test alone leaves O(sqrt(tolerance)) error in
  // beta.
  double step_tolerance = 1e-12;
  StepRule step_rule = StepRule::kFixedInverseLipschitz;
  bool record_trace = false;

  void validate() const {
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (!(tolerance > 0)) throw ConfigError("tolerance must be positive");
    if (!(step_tolerance > 0)) {
      throw ConfigError("step_tolerance must be positive");
    }
  }
};

struct FitResult {
  Vector beta;  // length d, exactly zero outside the mask
  double neg2_loglik = 0.0;  // residual sum of squares at beta
  int iterations = 0;
  bool converged = true;
  double l1_norm = 0.0;
  std::vector<double> objective_trace;  // filled when record_trace is set
};

// Euclidean projection onto {u : |u|_1 <= radius} by sort and threshold.
inline Vector project_l1(const Vector& v, double radius) {
  if (!(radius > 0)) throw ConfigError("l1 radius must be positive");
  if (v.lpNorm<1>() <= radius) return v;

  std::vector<double> mags(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    mags[static_cast<std::size_t>(i)] = std::abs(v(i));
  }
  std::sort(mags.begin(), mags.end(), std::greater<>());

  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < mags.size(); ++j) {
    cumsum += mags[j];
    const double candidate = (cumsum - radius) / static_cast<double>(j + 1);
    if (mags[j] - candidate > 0) theta = candidate;
  }

  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double shrunk = std::max(std::abs(v(i)) - theta, 0.0);
    out(i) = std::copysign(shrunk, v(i));
  }
  return out;
}

// Largest eigenvalue of a symmetric PSD matrix by power iteration; returns
// the final Rayleigh quotient.
inline double largest_eigenvalue(const Matrix& a, double tol = 1e-8,
                                 int max_iterations = 10000) {
  const auto k = a.rows();
  if (k == 0) return 0.0;
  // Uneven start so it is not orthogonal to structured eigenvectors.
  Vector v(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    v(i) = 1.0 + 0.618033988749895 * static_cast<double>(i % 7) +
           0.1 * static_cast<double>(i);
  }
  v.normalize();
  double lambda = v.dot(a * v);
  for (int it = 0; it < max_iterations; ++it) {
    Vector w = a * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double next = v.dot(a * v);
    const bool done = std::abs(next - lambda) <= tol * std::abs(next);
    lambda = next;
    if (done) break;
  }
  return lambda;
}

namespace detail {

inline Vector embed(const Vector& restricted, ModelMask m, int d) {
  Vector full = Vector::Zero(d);
  const std::vector<int> idx = m.indices();
  for (std::size_t a = 0; a < idx.size(); ++a) {
    full(idx[a]) = restricted(static_cast<Eigen::Index>(a));
  }
  return full;
}

}  // namespace detail

// Minimizes ||Y - X beta||^2 over beta supported on m with |beta|_1 <= R,
// using projected gradient on the sufficient statistics. Starts at zero.
inline FitResult fit_constrained_ls(const SufficientStats& s, ModelMask m,
                                    double radius,
                                    const SolverConfig& cfg = {}) {
  cfg.validate();
  if (!(radius > 0)) throw ConfigError("R must be positive");
  if (s.xtx.rows() != s.d() || s.xtx.cols() != s.d()) {
    throw DataError("sufficient statistics are inconsistent");
  }
  const int d = s.d();
  FitResult result;
  if (m.empty()) {
    result.beta = Vector::Zero(d);
    result.neg2_loglik = s.yty;
    return result;
  }

  const SufficientStats sub = restrict(s, m);
  const auto k = sub.xtx.rows();
  const auto objective = [&sub](const Vector& b) { return sub.rss(b); };
  const auto gradient = [&sub](const Vector& b) -> Vector {
    return 2.0 * (sub.xtx * b - sub.xty);
  };

  Vector beta = Vector::Zero(k);
  double f = objective(beta);
  if (cfg.record_trace) result.objective_trace.push_back(f);

  // Lipschitz constant of the gradient is 2 * lambda_max(X_M^T X_M).
  double lipschitz = 2.0 * largest_eigenvalue(sub.xtx);
  if (cfg.step_rule == StepRule::kBacktracking) {
    lipschitz = 2.0 * sub.xtx.diagonal().maxCoeff();
  }
  if (!(lipschitz > 0)) {
    // X_M is identically zero; every beta gives the same loss.
    result.beta = Vector::Zero(d);
    result.neg2_loglik = f;
    return result;
  }

  bool converged = false;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    const Vector g = gradient(beta);
    Vector next;
    double f_next = 0.0;
    // Both rules accept a step only under the quadratic upper bound, so the
    // objective never increases. The fixed rule only enlarges L if the power
    // iteration underestimated it.
    for (int guard = 0; guard < 64; ++guard) {
      next = project_l1(beta - g / lipschitz, radius);
      f_next = objective(next);
      const Vector diff = next - beta;
      const double bound =
          f + g.dot(diff) + 0.5 * lipschitz * diff.squaredNorm();
      if (f_next <= bound + 1e-12 * std::max(1.0, std::abs(f))) break;
      lipschitz *= 2.0;
    }
    const double step = (next - beta).lpNorm<Eigen::Infinity>();
    const double decrease = f - f_next;
    beta = std::move(next);
    f = f_next;
    if (cfg.record_trace) result.objective_trace.push_back(f_next);

    const double scale = std::max(std::abs(f), std::numeric_limits<double>::min());
    const bool small_decrease = decrease <= cfg.tolerance * scale;
    const bool small_step =
        step <= cfg.step_tolerance * (1.0 + beta.lpNorm<Eigen::Infinity>());
    if (small_decrease && small_step) {
      converged = true;
      ++it;
      break;
    }
  }

  result.beta = detail::embed(beta, m, d);
  result.neg2_loglik = objective(beta);
  result.iterations = it;
  result.converged = converged;
  result.l1_norm = beta.lpNorm<1>();
  return result;
}

// RSS values below n * kDegenerateRssFloor are treated as perfect fits.
inline constexpr double kDegenerateRssFloor = 1e-12;

// -2 * profile log-likelihood, n * log(RSS / n).
inline double profile_loglik(double neg2_loglik, Eigen::Index n) {
  if (n < 1) throw ConfigError("n must be at least 1");
  if (!(neg2_loglik > 0)) {
    throw DegenerateFit("residual sum of squares is not positive");
  }
  const auto nn = static_cast<double>(n);
  return nn * std::log(neg2_loglik / nn);
}

inline double profile_loglik(const FitResult& fit, Eigen::Index n) {
  return profile_loglik(fit.neg2_loglik, n);
}

// profile_loglik with near-perfect fits mapped to n * log(1e-12).
inline double profile_loglik_floored(double neg2_loglik, Eigen::Index n) {
  const auto nn = static_cast<double>(n);
  if (neg2_loglik < nn * kDegenerateRssFloor) {
    return nn * std::log(kDegenerateRssFloor);
  }
  return profile_loglik(neg2_loglik, n);
}

}  // namespace dpms

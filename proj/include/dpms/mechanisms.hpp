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
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <unordered_set>
#include <vector>

#include "dpms/core_data.hpp"
#include "dpms/error.hpp"
#include "dpms/rng.hpp"

namespace dpms {

// epsilon = +infinity is accepted and means "no noise" (non-private
// baseline runs only).
struct PrivacyBudget {
  double epsilon = 1.0;
  double delta = 0.0;

  void validate() const {
    if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
    if (!(delta >= 0 && delta < 1)) {
      throw ConfigError("delta must lie in [0, 1)");
    }
  }
  bool noiseless() const { return std::isinf(epsilon); }
};

// Stream-key tags separating the different uses of one RngStream.
inline constexpr std::uint64_t kTagCandidateNoise = 0x6e6f697379ULL;
inline constexpr std::uint64_t kTagExponential = 0x6578706dULL;
inline constexpr std::uint64_t kTagSensitivity = 0x47446ULL;
inline constexpr std::uint64_t kTagUniform = 0x756e6966ULL;

// Laplace(0, scale) by inverse CDF from a 53-bit uniform, u = 0 rejected.
inline double sample_laplace(RngStream& rng, double scale = 1.0) {
  if (!(scale > 0)) throw ConfigError("Laplace scale must be positive");
  const double v = rng.uniform_open() - 0.5;  // in (-0.5, 0.5)
  return -scale * std::copysign(std::log1p(-2.0 * std::abs(v)), v);
}

// value + (sensitivity / epsilon) * Z with Z standard Laplace.
inline double noisy_release(double value, double sensitivity,
                            const PrivacyBudget& budget, RngStream& rng) {
  budget.validate();
  if (!(sensitivity > 0)) throw ConfigError("sensitivity must be positive");
  if (budget.delta != 0.0) {
    throw ConfigError("the Laplace release is a pure epsilon mechanism");
  }
  if (budget.noiseless()) return value;
  return value + sample_laplace(rng, sensitivity / budget.epsilon);
}

struct ScoredCandidate {
  ModelMask mask;
  double score = 0.0;  // a loss: lower is better
  double noise_scale = 0.0;  // 0 only for noiseless runs
};

struct MechanismOutcome {
  std::size_t chosen_index = 0;
  ModelMask chosen;
  // Realized noisy scores, aligned with the input list. Empty for the
  // exponential mechanism, which has no per-candidate noise.
  std::vector<double> noisy_scores;
};

namespace detail {

inline void check_candidates(std::span<const ScoredCandidate> candidates) {
  if (candidates.empty()) throw ConfigError("candidate list is empty");
  std::unordered_set<ModelMask, ModelMaskHash> seen;
  for (const auto& c : candidates) {
    if (!seen.insert(c.mask).second) {
      throw ConfigError("duplicate model in candidate list");
    }
    if (!(c.noise_scale >= 0) || std::isnan(c.score)) {
      throw ConfigError("candidate has invalid score or noise scale");
    }
  }
}

// Lower value wins; ties go to the canonically smaller mask.
inline bool better(double a, ModelMask ma, double b, ModelMask mb) {
  if (a != b) return a < b;
  return CanonicalOrder{}(ma, mb);
}

}  // namespace detail

// Noise for a candidate is drawn from a child stream keyed by its mask, so a
// permuted list under the same stream gets the same per-model draws.
inline double candidate_noise(const RngStream& rng, ModelMask mask) {
  RngStream child = rng.fork(stream_key({kTagCandidateNoise, mask.bits()}));
  return sample_laplace(child, 1.0);
}

// Adds noise_scale * Z_M to each score and returns the noisy minimizer.
inline MechanismOutcome noisy_argmin(std::span<const ScoredCandidate> candidates,
                                     const RngStream& rng) {
  detail::check_candidates(candidates);
  MechanismOutcome out;
  out.noisy_scores.reserve(candidates.size());
  for (const auto& c : candidates) {
    const double noise =
        c.noise_scale > 0 ? c.noise_scale * candidate_noise(rng, c.mask) : 0.0;
    out.noisy_scores.push_back(c.score + noise);
  }
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (detail::better(out.noisy_scores[i], candidates[i].mask,
                       out.noisy_scores[out.chosen_index],
                       candidates[out.chosen_index].mask)) {
      out.chosen_index = i;
    }
  }
  out.chosen = candidates[out.chosen_index].mask;
  return out;
}

// Selection probabilities proportional to exp(-eps * score / (2 * sens)),
// aligned with the input list.
inline std::vector<double> exponential_probabilities(
    std::span<const ScoredCandidate> candidates, double sensitivity,
    const PrivacyBudget& budget) {
  detail::check_candidates(candidates);
  budget.validate();
  if (!(sensitivity > 0)) throw ConfigError("sensitivity must be positive");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) best = std::min(best, c.score);

  std::vector<double> w(candidates.size(), 0.0);
  if (budget.noiseless()) {
    // Point mass on the canonical minimizer.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      if (detail::better(candidates[i].score, candidates[i].mask,
                         candidates[arg].score, candidates[arg].mask)) {
        arg = i;
      }
    }
    w[arg] = 1.0;
    return w;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    w[i] = std::exp(-budget.epsilon * (candidates[i].score - best) /
                    (2.0 * sensitivity));
    total += w[i];
  }
  // The minimizer has weight exactly 1 after the shift.
  assert(total >= 1.0);
  for (double& x : w) x /= total;
  return w;
}

inline MechanismOutcome exponential_mechanism(
    std::span<const ScoredCandidate> candidates, double sensitivity,
    const PrivacyBudget& budget, const RngStream& rng) {
  if (budget.delta != 0.0) {
    throw ConfigError("the exponential mechanism is a pure epsilon mechanism");
  }
  const std::vector<double> p =
      exponential_probabilities(candidates, sensitivity, budget);

  // Walk the cumulative distribution in canonical mask order so the outcome
  // does not depend on list position.
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return CanonicalOrder{}(candidates[a].mask, candidates[b].mask);
  });
  RngStream child = rng.fork(kTagExponential);
  const double u = child.uniform();
  double acc = 0.0;
  MechanismOutcome out;
  out.chosen_index = order.back();
  for (std::size_t i : order) {
    acc += p[i];
    if (u < acc && p[i] > 0) {
      out.chosen_index = i;
      break;
    }
  }
  out.chosen = candidates[out.chosen_index].mask;
  return out;
}

// Uniform draw over the candidate list, independent of the data.
inline MechanismOutcome uniform_choice(std::span<const ScoredCandidate> candidates,
                                       const RngStream& rng) {
  detail::check_candidates(candidates);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return CanonicalOrder{}(candidates[a].mask, candidates[b].mask);
  });
  RngStream child = rng.fork(kTagUniform);
  const auto k = candidates.size();
  const auto slot = std::min(
      k - 1, static_cast<std::size_t>(child.uniform() * static_cast<double>(k)));
  MechanismOutcome out;
  out.chosen_index = order[slot];
  out.chosen = candidates[out.chosen_index].mask;
  return out;
}

// Budget of an eps1-private sensitivity estimate feeding an eps2-private
// mechanism that is valid whenever the estimate holds (probability 1 - delta).
inline PrivacyBudget compose_eps_delta(double stage1_eps, double stage2_eps,
                                       double delta) {
  if (!(stage1_eps > 0) || !(stage2_eps > 0)) {
    throw ConfigError("both stage budgets must be positive");
  }
  if (!(delta > 0 && delta < 1)) throw ConfigError("delta must lie in (0, 1)");
  return PrivacyBudget{stage1_eps + stage2_eps, delta};
}

}  // namespace dpms

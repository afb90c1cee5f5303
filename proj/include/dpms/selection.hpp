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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpms/core_data.hpp"
#include "dpms/enumeration.hpp"
#include "dpms/error.hpp"
#include "dpms/mechanisms.hpp"
#include "dpms/rng.hpp"
#include "dpms/solver.hpp"

namespace dpms {

enum class Mechanism { kNoisyArgmin, kExponential };
enum class Algorithm { kPcls, kPcpl };

inline std::string to_string(Mechanism m) {
  return m == Mechanism::kNoisyArgmin ? "noisy_argmin" : "exponential";
}
inline std::string to_string(Algorithm a) {
  return a == Algorithm::kPcls ? "pcls" : "pcpl";
}

// R and phi_n are public constants chosen by the analyst. Fitting them on the
// private data inside a selection call would void the privacy guarantee.
struct SelectionConfig {
  double R = 1.0;       // l1 radius on the coefficients
  double phi_n = 0.0;   // per-variable complexity penalty
  // For PCLS: the whole budget (delta must be 0). For PCPL: epsilon is the
  // per-stage value, so the total spent is (2 * epsilon, delta).
  PrivacyBudget budget;
  Mechanism mechanism = Mechanism::kNoisyArgmin;
  double r = 1.0;       // response bound, normally copied from the Dataset
  // Share of the PCPL total 2 * epsilon spent on estimating G(D).
  double stage1_fraction = 0.5;
  SolverConfig solver;

  void validate() const {
    if (!(R > 0)) throw ConfigError("R must be positive");
    if (!(phi_n >= 0)) throw ConfigError("phi_n must be non-negative");
    if (!(r > 0) || std::isinf(r)) throw ConfigError("r must be positive");
    if (!(stage1_fraction > 0 && stage1_fraction < 1)) {
      throw ConfigError("stage1_fraction must lie in (0, 1)");
    }
    budget.validate();
    solver.validate();
  }
};

struct SensitivityBound {
  enum class Kind { kGlobalLs, kLocalProfile };
  Kind kind = Kind::kGlobalLs;
  double value = 0.0;
};

// Global sensitivity of the constrained squared-error loss: (r + R)^2.
inline SensitivityBound ls_sensitivity(double r, double R) {
  if (!(r > 0) || !(R > 0)) throw ConfigError("r and R must be positive");
  return {SensitivityBound::Kind::kGlobalLs, (r + R) * (r + R)};
}

// Local sensitivity bound of the constrained profile likelihood at a dataset
// whose constrained RSS is neg2_loglik; absent when RSS <= (r + R)^2.
inline std::optional<SensitivityBound> profile_local_sensitivity(
    Eigen::Index n, double r, double R, double neg2_loglik) {
  const double c = ls_sensitivity(r, R).value;
  const double denom = neg2_loglik - c;
  if (!(denom > 0)) return std::nullopt;
  return SensitivityBound{SensitivityBound::Kind::kLocalProfile,
                          static_cast<double>(n) * c / denom};
}

// Private upper bound on the profile-likelihood local sensitivity:
//   G = n c / (min_loss - c + c (z_g - log(1 / (2 delta))) / eps1),
// c = (r + R)^2. Returns nullopt when the denominator is not positive.
inline std::optional<double> g_of_d_formula(Eigen::Index n, double r, double R,
                                            double min_loss, double stage1_eps,
                                            double delta, double z_g) {
  if (!(stage1_eps > 0)) throw ConfigError("stage-1 epsilon must be positive");
  if (!(delta > 0 && delta < 1)) throw ConfigError("delta must lie in (0, 1)");
  const double c = ls_sensitivity(r, R).value;
  const double denom =
      min_loss - c + c * (z_g - std::log(1.0 / (2.0 * delta))) / stage1_eps;
  if (!(denom > 0)) return std::nullopt;
  return static_cast<double>(n) * c / denom;
}

struct ModelScore {
  ModelMask mask;
  double neg2_loglik = 0.0;  // constrained RSS
  double clean_score = 0.0;  // penalized score before noise
  std::optional<double> noisy_score;
  bool converged = true;
};

// Everything a selection call produced. The clean scores are computed from
// the private data without noise; releasing them voids the guarantee.
struct SelectionReport {
  Algorithm algorithm = Algorithm::kPcls;
  ModelMask chosen;
  std::vector<ModelScore> per_model;
  std::optional<double> g_of_d;
  std::optional<double> sensitivity_used;
  SelectionConfig config;
  PrivacyBudget total_budget;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  bool fallback_uniform = false;
  bool r_data_dependent = false;
  int nonconverged = 0;
};

// Constrained fits for every candidate, in list order.
inline std::vector<FitResult> fit_all(const SufficientStats& stats,
                                      const CandidateSet& models, double R,
                                      const SolverConfig& solver = {}) {
  if (models.d() != stats.d()) {
    throw DataError("candidate set dimension " + std::to_string(models.d()) +
                    " does not match data dimension " +
                    std::to_string(stats.d()));
  }
  std::vector<FitResult> fits;
  fits.reserve(models.size());
  for (ModelMask m : models) fits.push_back(fit_constrained_ls(stats, m, R, solver));
  return fits;
}

namespace detail {

inline SelectionReport start_report(Algorithm algorithm, const CandidateSet& models,
                                    std::span<const FitResult> fits,
                                    const SelectionConfig& cfg,
                                    const RngStream& rng) {
  if (models.empty()) throw ConfigError("candidate model list is empty");
  if (fits.size() != models.size()) {
    throw ConfigError("one fit per candidate model is required");
  }
  SelectionReport report;
  report.algorithm = algorithm;
  report.config = cfg;
  report.seed = rng.seed();
  report.stream_id = rng.stream_id();
  report.per_model.reserve(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    ModelScore s;
    s.mask = models.masks()[i];
    s.neg2_loglik = fits[i].neg2_loglik;
    s.converged = fits[i].converged;
    if (!s.converged) ++report.nonconverged;
    report.per_model.push_back(s);
  }
  return report;
}

inline void run_mechanism(SelectionReport& report, double noise_scale,
                          double sensitivity, const PrivacyBudget& budget,
                          Mechanism mechanism, const RngStream& rng) {
  std::vector<ScoredCandidate> cands;
  cands.reserve(report.per_model.size());
  for (const auto& s : report.per_model) {
    cands.push_back({s.mask, s.clean_score, noise_scale});
  }
  if (mechanism == Mechanism::kNoisyArgmin) {
    const MechanismOutcome out = noisy_argmin(cands, rng);
    for (std::size_t i = 0; i < cands.size(); ++i) {
      report.per_model[i].noisy_score = out.noisy_scores[i];
    }
    report.chosen = out.chosen;
  } else {
    report.chosen =
        exponential_mechanism(cands, sensitivity, {budget.epsilon, 0.0}, rng).chosen;
  }
}

}  // namespace detail

// Penalized constrained least squares on precomputed fits. Useful when one
// set of fits serves many (phi, epsilon) settings.
inline SelectionReport pcls_from_fits(const CandidateSet& models,
                                      std::span<const FitResult> fits,
                                      const SelectionConfig& cfg,
                                      const RngStream& rng) {
  cfg.validate();
  if (cfg.budget.delta != 0.0) {
    throw ConfigError("PCLS is a pure epsilon procedure; delta must be 0");
  }
  SelectionReport report =
      detail::start_report(Algorithm::kPcls, models, fits, cfg, rng);
  for (auto& s : report.per_model) {
    s.clean_score = s.neg2_loglik + cfg.phi_n * s.mask.size();
  }
  const double sensitivity = ls_sensitivity(cfg.r, cfg.R).value;
  report.sensitivity_used = sensitivity;
  report.total_budget = cfg.budget;
  const double scale =
      cfg.budget.noiseless() ? 0.0 : 2.0 * sensitivity / cfg.budget.epsilon;
  detail::run_mechanism(report, scale, sensitivity, cfg.budget, cfg.mechanism, rng);
  return report;
}

inline SelectionReport pcls_select(const Dataset& data, const CandidateSet& models,
                                   SelectionConfig cfg, const RngStream& rng) {
  cfg.r = data.r();
  cfg.validate();
  const std::vector<FitResult> fits =
      fit_all(sufficient_stats(data), models, cfg.R, cfg.solver);
  SelectionReport report = pcls_from_fits(models, fits, cfg, rng);
  report.r_data_dependent = data.r_data_dependent();
  return report;
}

// G(D) from precomputed fits and an explicit Laplace draw z_g.
inline std::optional<double> g_of_d_from_fits(Eigen::Index n,
                                              std::span<const FitResult> fits,
                                              const SelectionConfig& cfg,
                                              double stage1_eps, double z_g) {
  if (fits.empty()) throw ConfigError("candidate model list is empty");
  double min_loss = fits.front().neg2_loglik;
  for (const auto& f : fits) min_loss = std::min(min_loss, f.neg2_loglik);
  return g_of_d_formula(n, cfg.r, cfg.R, min_loss, stage1_eps, cfg.budget.delta,
                        z_g);
}

inline double draw_z_g(const RngStream& rng) {
  RngStream child = rng.fork(kTagSensitivity);
  return sample_laplace(child, 1.0);
}

// Noisy bound on the profile-likelihood sensitivity over the candidate list.
// nullopt is the non-positive-denominator sentinel.
inline std::optional<double> compute_g_of_d(const Dataset& data,
                                            const CandidateSet& models,
                                            SelectionConfig cfg, double stage1_eps,
                                            const RngStream& rng) {
  cfg.r = data.r();
  cfg.validate();
  const std::vector<FitResult> fits =
      fit_all(sufficient_stats(data), models, cfg.R, cfg.solver);
  return g_of_d_from_fits(data.n(), fits, cfg, stage1_eps, draw_z_g(rng));
}

// Penalized constrained profile likelihood on precomputed fits. When
// forced_z_g is set it replaces the stage-1 Laplace draw (testing hook).
inline SelectionReport pcpl_from_fits(Eigen::Index n, const CandidateSet& models,
                                      std::span<const FitResult> fits,
                                      const SelectionConfig& cfg,
                                      const RngStream& rng,
                                      std::optional<double> forced_z_g = std::nullopt) {
  cfg.validate();
  if (!(cfg.budget.delta > 0)) {
    throw ConfigError("PCPL needs delta in (0, 1)");
  }
  SelectionReport report =
      detail::start_report(Algorithm::kPcpl, models, fits, cfg, rng);
  for (auto& s : report.per_model) {
    s.clean_score = profile_loglik_floored(s.neg2_loglik, n) + cfg.phi_n * s.mask.size();
  }

  if (cfg.budget.noiseless()) {
    report.total_budget = cfg.budget;
    detail::run_mechanism(report, 0.0, 1.0, cfg.budget, cfg.mechanism, rng);
    return report;
  }

  const double total_eps = 2.0 * cfg.budget.epsilon;
  const double eps1 = total_eps * cfg.stage1_fraction;
  const double eps2 = total_eps - eps1;
  report.total_budget = compose_eps_delta(eps1, eps2, cfg.budget.delta);

  // Stage 1: only G(D) may depend on the data before stage 2 calibrates.
  const double z_g = forced_z_g.value_or(draw_z_g(rng));
  report.g_of_d = g_of_d_from_fits(n, fits, cfg, eps1, z_g);

  if (!report.g_of_d) {
    // Data-independent output; stage 2 spends nothing.
    std::vector<ScoredCandidate> cands;
    for (const auto& s : report.per_model) cands.push_back({s.mask, s.clean_score, 0.0});
    report.chosen = uniform_choice(cands, rng).chosen;
    report.fallback_uniform = true;
    return report;
  }
  const double g = *report.g_of_d;
  report.sensitivity_used = g;
  detail::run_mechanism(report, 2.0 * g / eps2, g, {eps2, 0.0}, cfg.mechanism, rng);
  return report;
}

inline SelectionReport pcpl_select(const Dataset& data, const CandidateSet& models,
                                   SelectionConfig cfg, const RngStream& rng) {
  cfg.r = data.r();
  cfg.validate();
  const std::vector<FitResult> fits =
      fit_all(sufficient_stats(data), models, cfg.R, cfg.solver);
  SelectionReport report = pcpl_from_fits(data.n(), models, fits, cfg, rng);
  report.r_data_dependent = data.r_data_dependent();
  return report;
}

inline nlohmann::json mask_to_json(ModelMask m) {
  nlohmann::json arr = nlohmann::json::array();
  for (int j : m.indices()) arr.push_back(j + 1);
  return arr;
}

inline nlohmann::json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

// Serializes a report. Masks use 1-based column indices. Clean scores are
// written only when include_clean_scores is set.
inline nlohmann::json to_json(const SelectionReport& report,
                              bool include_clean_scores = false,
                              const std::vector<std::string>& names = {}) {
  nlohmann::json j;
  j["algorithm"] = to_string(report.algorithm);
  j["chosen"] = mask_to_json(report.chosen);
  if (!names.empty()) {
    nlohmann::json chosen_names = nlohmann::json::array();
    for (int idx : report.chosen.indices()) {
      chosen_names.push_back(names.at(static_cast<std::size_t>(idx)));
    }
    j["chosen_names"] = chosen_names;
  }
  j["epsilon_total"] = number_or_inf(report.total_budget.epsilon);
  j["delta"] = report.total_budget.delta;
  j["R"] = report.config.R;
  j["phi_n"] = report.config.phi_n;
  j["r"] = report.config.r;
  j["r_data_dependent"] = report.r_data_dependent;
  j["seed"] = report.seed;
  j["stream_id"] = report.stream_id;
  j["mechanism"] = to_string(report.config.mechanism);
  j["fallback_uniform"] = report.fallback_uniform;
  if (report.g_of_d) j["g_of_d"] = *report.g_of_d;
  if (report.sensitivity_used) j["sensitivity_used"] = *report.sensitivity_used;
  j["nonconverged_fits"] = report.nonconverged;
  nlohmann::json models = nlohmann::json::array();
  for (const auto& s : report.per_model) {
    nlohmann::json m;
    m["mask"] = mask_to_json(s.mask);
    m["noisy_score"] = s.noisy_score ? nlohmann::json(*s.noisy_score) : nlohmann::json();
    if (include_clean_scores) m["clean_score"] = s.clean_score;
    models.push_back(std::move(m));
  }
  j["models"] = std::move(models);
  return j;
}

}  // namespace dpms

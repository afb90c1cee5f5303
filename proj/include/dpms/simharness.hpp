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
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dpms/core_data.hpp"
#include "dpms/enumeration.hpp"
#include "dpms/error.hpp"
#include "dpms/rng.hpp"
#include "dpms/selection.hpp"
#include "dpms/solver.hpp"

namespace dpms {

// Y = X beta0 + W with X iid Uniform[-1, 1] and W iid Normal(0, sigma^2).
struct SyntheticSpec {
  Eigen::Index n = 100;
  Vector beta0;
  double sigma = 1.0;
  int model_id = 0;  // label only; 1 and 2 are the built-in designs
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  void validate() const {
    if (n < 1) throw ConfigError("n must be at least 1");
    if (beta0.size() < 1 || beta0.size() > kMaxCovariates) {
      throw ConfigError("beta0 must have between 1 and 64 entries");
    }
    if (!(sigma > 0)) throw ConfigError("sigma must be positive");
  }
};

// Built-in coefficient vectors: 1 -> (1,1,1,0,0,0), 2 -> (1.5,1,0.5,0,0,0).
inline Vector builtin_beta(int model_id) {
  Vector b = Vector::Zero(6);
  if (model_id == 1) {
    b.head(3).setOnes();
  } else if (model_id == 2) {
    b(0) = 1.5;
    b(1) = 1.0;
    b(2) = 0.5;
  } else {
    throw ConfigError("unknown built-in model id " + std::to_string(model_id));
  }
  return b;
}

inline ModelMask support_of(const Vector& beta) {
  std::uint64_t bits = 0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta(j) != 0.0) bits |= std::uint64_t{1} << j;
  }
  return ModelMask(bits);
}

struct SyntheticData {
  Dataset data;
  ModelMask true_mask;
};

// r is set to max|Y| of the draw, so the dataset is flagged data-dependent.
inline SyntheticData generate(const SyntheticSpec& spec) {
  spec.validate();
  RngStream rng(spec.seed, spec.stream_id);
  const auto n = spec.n;
  const auto d = spec.beta0.size();
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = 2.0 * rng.uniform() - 1.0;
  }
  std::normal_distribution<double> noise(0.0, spec.sigma);
  Vector y = x * spec.beta0;
  for (Eigen::Index i = 0; i < n; ++i) y(i) += noise(rng.engine());
  double r = y.cwiseAbs().maxCoeff();
  if (!(r > 0)) r = std::numeric_limits<double>::min();
  return {Dataset(std::move(x), std::move(y), r, {}, true), support_of(spec.beta0)};
}

// 0 followed by 40 log-spaced points from 0.01 n to n / 2.
inline std::vector<double> default_phi_grid(Eigen::Index n) {
  constexpr int kPoints = 40;
  const double lo = std::log(0.01 * static_cast<double>(n));
  const double hi = std::log(0.5 * static_cast<double>(n));
  std::vector<double> grid{0.0};
  for (int k = 0; k < kPoints; ++k) {
    grid.push_back(std::exp(lo + (hi - lo) * k / (kPoints - 1)));
  }
  return grid;
}

struct SweepGrid {
  std::vector<double> R_values;
  // Empty means default_phi_grid(n) for each n.
  std::vector<double> phi_values;
  std::vector<double> eps_values;
  std::vector<double> delta_values{0.0};
  std::vector<Eigen::Index> n_values;
  int replications = 500;
  Algorithm algorithm = Algorithm::kPcls;
  Mechanism mechanism = Mechanism::kNoisyArgmin;
  bool include_empty_model = false;

  void validate() const {
    if (R_values.empty() || eps_values.empty() || delta_values.empty() ||
        n_values.empty()) {
      throw ConfigError("every sweep grid axis needs at least one value");
    }
    if (replications < 1) throw ConfigError("replications must be >= 1");
    for (double R : R_values) {
      if (!(R > 0)) throw ConfigError("R values must be positive");
    }
    for (double p : phi_values) {
      if (!(p >= 0)) throw ConfigError("phi values must be non-negative");
    }
    for (double e : eps_values) {
      if (!(e > 0)) throw ConfigError("epsilon values must be positive");
    }
    for (double dl : delta_values) {
      if (algorithm == Algorithm::kPcls && dl != 0.0) {
        throw ConfigError("PCLS sweeps take delta = 0 only");
      }
      if (algorithm == Algorithm::kPcpl && !(dl > 0 && dl < 1)) {
        throw ConfigError("PCPL sweeps need delta in (0, 1)");
      }
    }
    for (auto n : n_values) {
      if (n < 2) throw ConfigError("n values must be at least 2");
    }
  }
};

struct SweepRow {
  Eigen::Index n = 0;
  int d = 0;
  int model_id = 0;
  double R = 0.0;
  double phi = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  Algorithm algorithm = Algorithm::kPcls;
  int replications = 0;
  double prop_correct = 0.0;
  double prop_agree = 0.0;
  double fallback_rate = 0.0;
  long long nonconverged_fits = 0;
  double mean_runtime_ms = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

struct SweepOptions {
  // 0 means DPMS_THREADS if set, otherwise the hardware concurrency.
  unsigned threads = 0;
  // Wall-clock timing makes results non-reproducible, so it is opt-in.
  bool measure_runtime = false;
};

inline unsigned resolve_threads(unsigned requested) {
  unsigned hw = std::max(1U, std::thread::hardware_concurrency());
  unsigned n = requested > 0 ? requested : hw;
  if (const char* env = std::getenv("DPMS_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
  }
  return std::max(1U, n);
}

inline constexpr std::uint64_t kTagSweepData = 0x64617461ULL;
inline constexpr std::uint64_t kTagSweepNoise = 0x6e6f6973ULL;

namespace detail {

struct GridPoint {
  Eigen::Index n;
  std::size_t r_index;
  double R, phi, eps, delta;
};

struct PointTally {
  long long correct = 0;
  long long agree = 0;
  long long fallback = 0;
  long long nonconverged = 0;
  double runtime_ms = 0.0;

  void add(const PointTally& o) {
    correct += o.correct;
    agree += o.agree;
    fallback += o.fallback;
    nonconverged += o.nonconverged;
    runtime_ms += o.runtime_ms;
  }
};

inline ModelMask noiseless_choice(const SelectionReport& report) {
  // Canonical tie rule, same as the mechanisms.
  const ModelScore* best = &report.per_model.front();
  for (const auto& s : report.per_model) {
    if (s.clean_score < best->clean_score ||
        (s.clean_score == best->clean_score && CanonicalOrder{}(s.mask, best->mask))) {
      best = &s;
    }
  }
  return best->mask;
}

}  // namespace detail

// Runs every grid point for every replication. Datasets depend only on
// (seed, n, model_id, replication), so all (R, phi, epsilon, delta) settings
// of one replication share a draw; the privacy noise is keyed by the full
// grid point and replication. Results do not depend on thread count or
// execution order.
inline SweepResult run_sweep(const SweepGrid& grid, const SyntheticSpec& spec_template,
                             const SweepOptions& options = {}) {
  grid.validate();
  const int d = static_cast<int>(spec_template.beta0.size());
  const CandidateSet models = all_subsets(d, grid.include_empty_model);

  std::vector<detail::GridPoint> points;
  for (auto n : grid.n_values) {
    const std::vector<double> phis =
        grid.phi_values.empty() ? default_phi_grid(n) : grid.phi_values;
    for (std::size_t ri = 0; ri < grid.R_values.size(); ++ri) {
      for (double phi : phis) {
        for (double eps : grid.eps_values) {
          for (double delta : grid.delta_values) {
            points.push_back({n, ri, grid.R_values[ri], phi, eps, delta});
          }
        }
      }
    }
  }

  std::vector<detail::PointTally> totals(points.size());
  std::mutex merge_mutex;
  std::atomic<long long> next_task{0};
  const long long tasks =
      static_cast<long long>(grid.n_values.size()) * grid.replications;

  auto worker = [&]() {
    std::vector<detail::PointTally> local(points.size());
    for (;;) {
      const long long task = next_task.fetch_add(1);
      if (task >= tasks) break;
      const auto n = grid.n_values[static_cast<std::size_t>(task / grid.replications)];
      const auto rep = static_cast<std::uint64_t>(task % grid.replications);

      SyntheticSpec spec = spec_template;
      spec.n = n;
      spec.stream_id = stream_key({kTagSweepData, static_cast<std::uint64_t>(n),
                                   static_cast<std::uint64_t>(spec.model_id), rep});
      const SyntheticData sample = generate(spec);
      const SufficientStats stats = sufficient_stats(sample.data);

      std::vector<std::vector<FitResult>> fits(grid.R_values.size());
      std::vector<double> fit_ms(grid.R_values.size(), 0.0);
      for (std::size_t ri = 0; ri < grid.R_values.size(); ++ri) {
        const auto t0 = std::chrono::steady_clock::now();
        fits[ri] = fit_all(stats, models, grid.R_values[ri]);
        const auto t1 = std::chrono::steady_clock::now();
        fit_ms[ri] = std::chrono::duration<double, std::milli>(t1 - t0).count();
      }

      for (std::size_t p = 0; p < points.size(); ++p) {
        const auto& pt = points[p];
        if (pt.n != n) continue;
        SelectionConfig cfg;
        cfg.R = pt.R;
        cfg.phi_n = pt.phi;
        cfg.budget = {pt.eps, pt.delta};
        cfg.mechanism = grid.mechanism;
        cfg.r = sample.data.r();
        const RngStream noise(
            spec_template.seed,
            stream_key({kTagSweepNoise, static_cast<std::uint64_t>(n),
                        static_cast<std::uint64_t>(spec.model_id), key_of(pt.R),
                        key_of(pt.phi), key_of(pt.eps), key_of(pt.delta),
                        static_cast<std::uint64_t>(grid.algorithm), rep}));

        const auto t0 = std::chrono::steady_clock::now();
        const auto& f = fits[pt.r_index];
        const SelectionReport report =
            grid.algorithm == Algorithm::kPcls
                ? pcls_from_fits(models, f, cfg, noise)
                : pcpl_from_fits(n, models, f, cfg, noise);
        const auto t1 = std::chrono::steady_clock::now();

        auto& tally = local[p];
        tally.correct += report.chosen == sample.true_mask;
        tally.agree += report.chosen == detail::noiseless_choice(report);
        tally.fallback += report.fallback_uniform;
        tally.nonconverged += report.nonconverged;
        tally.runtime_ms +=
            fit_ms[pt.r_index] +
            std::chrono::duration<double, std::milli>(t1 - t0).count();
      }
    }
    std::lock_guard<std::mutex> lock(merge_mutex);
    for (std::size_t p = 0; p < points.size(); ++p) totals[p].add(local[p]);
  };

  const unsigned nthreads = resolve_threads(options.threads);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SweepResult result;
  result.rows.reserve(points.size());
  const double reps = grid.replications;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto& pt = points[p];
    SweepRow row;
    row.n = pt.n;
    row.d = d;
    row.model_id = spec_template.model_id;
    row.R = pt.R;
    row.phi = pt.phi;
    row.epsilon = pt.eps;
    row.delta = pt.delta;
    row.algorithm = grid.algorithm;
    row.replications = grid.replications;
    row.prop_correct = static_cast<double>(totals[p].correct) / reps;
    row.prop_agree = static_cast<double>(totals[p].agree) / reps;
    row.fallback_rate = static_cast<double>(totals[p].fallback) / reps;
    row.nonconverged_fits = totals[p].nonconverged;
    if (options.measure_runtime) row.mean_runtime_ms = totals[p].runtime_ms / reps;
    result.rows.push_back(row);
  }
  return result;
}

namespace detail {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  // Shortest round-trip representation, same as the JSON writer.
  return nlohmann::json(v).dump();
}

}  // namespace detail

inline void write_csv(std::ostream& os, const SweepResult& result) {
  os << "n,d,model_id,R,phi,epsilon,delta,algorithm,replications,prop_correct,"
        "prop_agree,fallback_rate,mean_runtime_ms\n";
  using detail::format_number;
  for (const auto& row : result.rows) {
    os << row.n << ',' << row.d << ',' << row.model_id << ',' << format_number(row.R)
       << ',' << format_number(row.phi) << ',' << format_number(row.epsilon) << ','
       << format_number(row.delta) << ',' << to_string(row.algorithm) << ','
       << row.replications << ',' << format_number(row.prop_correct) << ','
       << format_number(row.prop_agree) << ',' << format_number(row.fallback_rate)
       << ',' << format_number(row.mean_runtime_ms) << '\n';
  }
}

inline nlohmann::json to_json(const SweepResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : result.rows) {
    nlohmann::json j;
    j["n"] = row.n;
    j["d"] = row.d;
    j["model_id"] = row.model_id;
    j["R"] = row.R;
    j["phi"] = row.phi;
    j["epsilon"] = number_or_inf(row.epsilon);
    j["delta"] = row.delta;
    j["algorithm"] = to_string(row.algorithm);
    j["replications"] = row.replications;
    j["prop_correct"] = row.prop_correct;
    j["prop_agree"] = row.prop_agree;
    j["fallback_rate"] = row.fallback_rate;
    j["nonconverged_fits"] = row.nonconverged_fits;
    j["mean_runtime_ms"] = std::isnan(row.mean_runtime_ms)
                               ? nlohmann::json()
                               : nlohmann::json(row.mean_runtime_ms);
    rows.push_back(std::move(j));
  }
  return nlohmann::json{{"rows", rows}};
}

}  // namespace dpms

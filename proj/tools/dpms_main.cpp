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

// dpms: differentially private model selection for linear regression.
//
//   dpms select   --input data.csv --response y --R 3.5 --phi 120 --epsilon 5
//   dpms sweep    --model-id 1 --n 100,1000 --eps 0.1,1,5,10 --R 1,2.5,3.5,10
//   dpms validate --input data.csv --response y
//
// Exit codes: 0 success, 1 data or I/O error, 2 configuration error.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpms/dpms.hpp"

namespace {

constexpr int kExitData = 1;
constexpr int kExitConfig = 2;

double parse_real(const std::string& text, const std::string& what) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
  if (lower == "inf" || lower == "infinity" || lower == "+inf") {
    return std::numeric_limits<double>::infinity();
  }
  const auto v = dpms::detail::parse_double(text);
  if (!v) throw dpms::ConfigError(what + ": cannot parse '" + text + "' as a number");
  return *v;
}

// Parses a list, dropping repeats with a warning.
std::vector<double> parse_list(const std::vector<std::string>& items,
                               const std::string& what) {
  std::vector<double> out;
  for (const auto& item : items) {
    const double v = parse_real(item, what);
    if (std::find(out.begin(), out.end(), v) != out.end()) {
      std::cerr << "warning: duplicate " << what << " value " << item
                << " ignored\n";
      continue;
    }
    out.push_back(v);
  }
  return out;
}

dpms::Algorithm parse_algorithm(const std::string& s) {
  if (s == "pcls") return dpms::Algorithm::kPcls;
  if (s == "pcpl") return dpms::Algorithm::kPcpl;
  throw dpms::ConfigError("unknown algorithm '" + s + "'");
}

dpms::Mechanism parse_mechanism(const std::string& s) {
  if (s == "noisy_argmin" || s == "noisy-argmin") return dpms::Mechanism::kNoisyArgmin;
  if (s == "exponential") return dpms::Mechanism::kExponential;
  throw dpms::ConfigError("unknown mechanism '" + s + "'");
}

dpms::StandardizePolicy parse_policy(const std::string& s) {
  if (s == "none") return dpms::StandardizePolicy::kNone;
  if (s == "clip") return dpms::StandardizePolicy::kClip;
  if (s == "rescale") return dpms::StandardizePolicy::kRescale;
  throw dpms::ConfigError("unknown standardize policy '" + s + "'");
}

// "name=lo:hi"
std::pair<std::string, dpms::Range> parse_range(const std::string& s) {
  const auto eq = s.rfind('=');
  const auto colon = s.rfind(':');
  if (eq == std::string::npos || colon == std::string::npos || colon < eq) {
    throw dpms::ConfigError("range '" + s + "' must look like name=lo:hi");
  }
  return {s.substr(0, eq),
          {parse_real(s.substr(eq + 1, colon - eq - 1), "range"),
           parse_real(s.substr(colon + 1), "range")}};
}

dpms::CandidateSet parse_models(const std::string& spec, int d) {
  if (spec == "all") return dpms::all_subsets(d, true);
  if (spec == "all-nonempty") return dpms::all_subsets(d, false);
  if (spec.rfind("size<=", 0) == 0) {
    const double k = parse_real(spec.substr(6), "--models size bound");
    if (k < 1 || k != std::floor(k)) throw dpms::ConfigError("bad size bound in --models");
    return dpms::all_subsets(d, false, std::min(static_cast<int>(k), d));
  }
  if (!spec.empty() && spec[0] == '@') {
    std::ifstream in(spec.substr(1));
    if (!in) throw dpms::DataError("cannot open model list '" + spec.substr(1) + "'");
    nlohmann::json j;
    try {
      in >> j;
      return dpms::from_explicit(j.get<std::vector<std::vector<int>>>(), d);
    } catch (const nlohmann::json::exception& e) {
      throw dpms::ConfigError("model list must be a JSON array of index arrays: " +
                              std::string(e.what()));
    }
  }
  throw dpms::ConfigError("--models must be all, all-nonempty, size<=k or @file.json");
}

struct DataFlags {
  std::string input;
  std::string response;
  std::optional<double> r;
  bool no_intercept = false;
  std::string standardize = "none";
  std::vector<std::string> ranges;

  void add_to(CLI::App* cmd, bool response_required) {
    cmd->add_option("--input", input, "CSV file with a header row")->required();
    auto* resp = cmd->add_option("--response", response, "Response column name");
    if (response_required) resp->required();
    cmd->add_option("--r", r, "Public bound on |Y| (default: max |Y|, data-dependent)");
    cmd->add_flag("--no-intercept", no_intercept, "Do not prepend an intercept column");
    cmd->add_option("--standardize", standardize, "none | clip | rescale");
    cmd->add_option("--range", ranges, "Public range for rescale, name=lo:hi (repeatable)");
  }

  dpms::Dataset load() const {
    const dpms::CsvTable table = dpms::read_csv_file(input);
    dpms::IngestOptions opts;
    opts.response = response.empty() ? table.header.back() : response;
    opts.include_intercept = !no_intercept;
    opts.policy = parse_policy(standardize);
    opts.r = r;
    for (const auto& s : ranges) opts.ranges.push_back(parse_range(s));
    return dpms::to_dataset(table, opts);
  }
};

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dpms::DataError("cannot write '" + path + "'");
  out << text;
}

struct SelectFlags {
  DataFlags data;
  std::string algorithm = "pcls";
  std::string mechanism = "noisy_argmin";
  double R = 0.0;
  double phi = 0.0;
  std::string epsilon;
  double delta = 0.0;
  double stage1_fraction = 0.5;
  std::string models = "all-nonempty";
  std::uint64_t seed = 0;
  std::string out;
  bool debug_unsafe = false;
};

int cmd_select(const SelectFlags& f) {
  dpms::SelectionConfig cfg;
  cfg.R = f.R;
  cfg.phi_n = f.phi;
  cfg.budget = {parse_real(f.epsilon, "--epsilon"), f.delta};
  cfg.mechanism = parse_mechanism(f.mechanism);
  cfg.stage1_fraction = f.stage1_fraction;
  const dpms::Algorithm algorithm = parse_algorithm(f.algorithm);
  if (algorithm == dpms::Algorithm::kPcpl && !(f.delta > 0)) {
    throw dpms::ConfigError("pcpl needs --delta in (0, 1)");
  }
  if (algorithm == dpms::Algorithm::kPcls && f.delta != 0.0) {
    throw dpms::ConfigError("pcls is pure epsilon-DP; omit --delta");
  }

  const dpms::Dataset data = f.data.load();
  cfg.r = data.r();
  cfg.validate();
  const dpms::CandidateSet models = parse_models(f.models, data.d());
  const dpms::RngStream rng(f.seed, 0);
  const dpms::SelectionReport report =
      algorithm == dpms::Algorithm::kPcls ? dpms::pcls_select(data, models, cfg, rng)
                                          : dpms::pcpl_select(data, models, cfg, rng);

  const nlohmann::json j = dpms::to_json(report, f.debug_unsafe, data.names());
  write_output(f.out, j.dump(2) + "\n");

  std::ostream& log = (f.out.empty() || f.out == "-") ? std::cerr : std::cout;
  log << "selected:";
  for (int idx : report.chosen.indices()) {
    log << ' ' << data.names()[static_cast<std::size_t>(idx)];
  }
  if (report.chosen.empty()) log << " (empty model)";
  log << '\n';
  if (report.fallback_uniform) {
    log << "note: G(D) denominator was not positive; output drawn uniformly\n";
  }
  if (data.r_data_dependent()) {
    log << "note: r was taken from the data (max |Y|); pass --r for a strict "
           "guarantee\n";
  }
  return 0;
}

struct SweepFlags {
  int model_id = 1;
  std::vector<std::string> n_values{"100", "1000"};
  std::vector<std::string> eps_values{"0.1", "1", "5", "10"};
  std::vector<std::string> r_values{"1", "2.5", "3.5", "10"};
  std::vector<std::string> phi_values;
  std::vector<std::string> delta_values;
  int replications = 500;
  std::string algorithm = "pcls";
  std::string mechanism = "noisy_argmin";
  double sigma = 1.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string json_out;
  unsigned threads = 0;
  bool timing = false;
};

int cmd_sweep(const SweepFlags& f) {
  dpms::SweepGrid grid;
  grid.algorithm = parse_algorithm(f.algorithm);
  grid.mechanism = parse_mechanism(f.mechanism);
  grid.R_values = parse_list(f.r_values, "R");
  grid.eps_values = parse_list(f.eps_values, "epsilon");
  grid.phi_values = parse_list(f.phi_values, "phi");
  if (f.delta_values.empty()) {
    grid.delta_values = {grid.algorithm == dpms::Algorithm::kPcls ? 0.0 : 1e-4};
  } else {
    grid.delta_values = parse_list(f.delta_values, "delta");
  }
  for (double v : parse_list(f.n_values, "n")) {
    if (v != std::floor(v) || v < 2) throw dpms::ConfigError("n values must be integers >= 2");
    grid.n_values.push_back(static_cast<Eigen::Index>(v));
  }
  grid.replications = f.replications;

  dpms::SyntheticSpec spec;
  spec.beta0 = dpms::builtin_beta(f.model_id);
  spec.model_id = f.model_id;
  spec.sigma = f.sigma;
  spec.seed = f.seed;
  spec.validate();
  grid.validate();

  dpms::SweepOptions opts;
  opts.threads = f.threads;
  opts.measure_runtime = f.timing;
  const dpms::SweepResult result = dpms::run_sweep(grid, spec, opts);

  std::ostringstream csv;
  dpms::write_csv(csv, result);
  write_output(f.out, csv.str());
  if (!f.json_out.empty()) write_output(f.json_out, dpms::to_json(result).dump(2) + "\n");
  return 0;
}

struct ValidateFlags {
  DataFlags data;
  std::optional<int> max_size;
};

int cmd_validate(const ValidateFlags& f) {
  const dpms::Dataset data = f.data.load();
  const int max_size = f.max_size.value_or(data.d());
  if (max_size < 1 || max_size > data.d()) {
    throw dpms::ConfigError("--max-size must lie in [1, d]");
  }
  const dpms::SufficientStats stats = dpms::sufficient_stats(data);
  const dpms::KappaEstimate k = dpms::estimate_kappa0(stats, max_size);
  const double guidance = dpms::inactive_radius(data.r(), max_size, k.kappa0);

  std::cout << "bounds: ok (|X| <= 1, |Y| <= r)\n";
  std::cout << "n: " << data.n() << "\n";
  std::cout << "d: " << data.d() << "\n";
  std::cout << "r: " << data.r()
            << (data.r_data_dependent() ? " (max |Y|, data-dependent)" : "") << "\n";
  std::cout << "max model size: " << max_size << "\n";
  std::cout << "kappa0: " << k.kappa0
            << (k.exact ? " (exact over " + std::to_string(k.supports_examined) + " supports)"
                        : " (lower bound: full-matrix minimum eigenvalue)")
            << "\n";
  std::cout << "R guidance: " << guidance
            << " (the l1 constraint is inactive for R at or above this)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private model selection for linear regression"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file of key = value lines");

  SelectFlags sel;
  auto* select = app.add_subcommand("select", "Run PCLS or PCPL on a CSV dataset");
  sel.data.add_to(select, true);
  select->add_option("--algorithm", sel.algorithm, "pcls | pcpl");
  select->add_option("--mechanism", sel.mechanism, "noisy_argmin | exponential");
  select->add_option("--R", sel.R, "l1 radius on the coefficients")->required();
  select->add_option("--phi", sel.phi, "Per-variable complexity penalty")->required();
  select->add_option("--epsilon", sel.epsilon, "Privacy parameter (inf: no noise)")->required();
  select->add_option("--delta", sel.delta, "delta for pcpl");
  select->add_option("--stage1-fraction", sel.stage1_fraction,
                     "Share of the pcpl budget spent on G(D)");
  select->add_option("--models", sel.models, "all | all-nonempty | size<=k | @file.json");
  select->add_option("--seed", sel.seed, "Random seed");
  select->add_option("--out", sel.out, "Report path (default stdout)");
  select->add_flag("--debug-unsafe", sel.debug_unsafe,
                   "Include clean (non-private) scores in the report");

  SweepFlags sw;
  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep on synthetic data");
  sweep->add_option("--model-id", sw.model_id, "Built-in design: 1 or 2");
  sweep->add_option("--n", sw.n_values, "Sample sizes")->delimiter(',');
  sweep->add_option("--eps", sw.eps_values, "Epsilon values")->delimiter(',');
  sweep->add_option("--R", sw.r_values, "l1 radii")->delimiter(',');
  sweep->add_option("--phi", sw.phi_values, "Penalties (default: per-n log grid)")
      ->delimiter(',');
  sweep->add_option("--delta", sw.delta_values, "delta values (pcpl)")->delimiter(',');
  sweep->add_option("--replications", sw.replications, "Datasets per grid point");
  sweep->add_option("--algorithm", sw.algorithm, "pcls | pcpl");
  sweep->add_option("--mechanism", sw.mechanism, "noisy_argmin | exponential");
  sweep->add_option("--sigma", sw.sigma, "Noise standard deviation");
  sweep->add_option("--seed", sw.seed, "Random seed");
  sweep->add_option("--out", sw.out, "CSV path (default stdout)");
  sweep->add_option("--json", sw.json_out, "Also write JSON here");
  sweep->add_option("--threads", sw.threads, "Worker threads (DPMS_THREADS caps)");
  sweep->add_flag("--timing", sw.timing, "Record mean runtime (not reproducible)");

  ValidateFlags val;
  auto* validate = app.add_subcommand("validate", "Check bounds and conditioning");
  val.data.add_to(validate, false);
  validate->add_option("--max-size", val.max_size, "Largest candidate size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (select->parsed()) return cmd_select(sel);
    if (sweep->parsed()) return cmd_sweep(sw);
    if (validate->parsed()) return cmd_validate(val);
  } catch (const dpms::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const dpms::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitConfig;
}

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

// Draws one dataset from the first built-in design and runs both selection
// procedures on it.

#include <iostream>

#include "dpms/dpms.hpp"

int main() {
  dpms::SyntheticSpec spec;
  spec.n = 1000;
  spec.beta0 = dpms::builtin_beta(1);
  spec.seed = 7;
  const dpms::SyntheticData sample = dpms::generate(spec);
  const dpms::CandidateSet models = dpms::all_subsets(6, false);

  dpms::SelectionConfig cfg;
  cfg.R = 3.5;
  cfg.phi_n = 150;
  cfg.budget = {5.0, 0.0};
  const dpms::RngStream rng(42, 0);

  const auto pcls = dpms::pcls_select(sample.data, models, cfg, rng);
  std::cout << "PCLS:\n" << dpms::to_json(pcls).dump(2) << "\n";

  cfg.budget = {5.0, 1e-4};
  const auto pcpl = dpms::pcpl_select(sample.data, models, cfg, rng);
  std::cout << "PCPL chose " << dpms::mask_to_json(pcpl.chosen).dump()
            << (pcpl.fallback_uniform ? " (uniform fallback)" : "") << "\n";
  return 0;
}

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

#include "dpms/core_data.hpp"
#include "dpms/csv.hpp"
#include "dpms/diagnostics.hpp"
#include "dpms/enumeration.hpp"
#include "dpms/error.hpp"
#include "dpms/mechanisms.hpp"
#include "dpms/rng.hpp"
#include "dpms/selection.hpp"
#include "dpms/simharness.hpp"
#include "dpms/solver.hpp"

// Copyright 2026 The smpkws Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "smpkws/tape.h"
#include "smpkws/tensor.h"

namespace smpkws {

// Builds a scalar on `tape` from parameter leaves bound in the same order as
// the tensors handed to GradCheck.
using ScalarFunction = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Coordinates checked per parameter tensor; smaller tensors are checked in full.
  std::size_t max_coords_per_param = 24;
  std::uint64_t seed = 0;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double denominator_floor = 1e-3;
  // A coordinate whose central differences at epsilon and epsilon/2 disagree
  // by more than this (relative, same denominator) straddles a kink of the
  // function (ReLU hinge, argmax switch) and is excluded from the maximum.
  double nonsmooth_tolerance = 1e-5;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t coordinates_nonsmooth = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares the reverse-mode gradient of `fn` against central differences
// (f(x+e) - f(x-e)) / 2e at sampled coordinates. Throws CheckInvalidError if
// two evaluations at the same point disagree, ConfigError for an epsilon
// outside [1e-7, 1e-3]. `params` is perturbed in place and restored.
GradCheckResult GradCheck(const ScalarFunction& fn, std::vector<Tensor>& params,
                          const GradCheckOptions& options = {});

}  // namespace smpkws

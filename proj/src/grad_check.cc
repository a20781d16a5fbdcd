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

#include "smpkws/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "smpkws/errors.h"

namespace smpkws {
namespace {

double Evaluate(const ScalarFunction& fn, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.Constant(p));
  Var out = fn(tape, vars);
  const Tensor& v = tape.value(out);
  if (v.size() != 1) throw DimensionError("gradient check needs a scalar function");
  return v[0];
}

std::vector<std::size_t> SampleCoordinates(std::size_t size, std::size_t limit,
                                           std::mt19937_64& rng) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (size <= limit) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckResult GradCheck(const ScalarFunction& fn, std::vector<Tensor>& params,
                          const GradCheckOptions& options) {
  const double eps = options.epsilon;
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ConfigError("gradient check epsilon must lie in [1e-7, 1e-3]");
  }

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& p : params) vars.push_back(tape.Variable(p));
  Var out = fn(tape, vars);
  const double base = tape.value(out)[0];
  tape.Backward(out);

  const double again = Evaluate(fn, params);
  if (!(base == again) && !(std::isnan(base) && std::isnan(again))) {
    throw CheckInvalidError("function under gradient check is not deterministic");
  }

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  auto denom = [&](double a, double b) {
    return std::max({std::abs(a), std::abs(b), options.denominator_floor});
  };
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::vector<double> analytic = tape.grad(vars[p]);
    for (std::size_t i : SampleCoordinates(params[p].size(), options.max_coords_per_param, rng)) {
      double& x = params[p][i];
      const double saved = x;
      auto central = [&](double h) {
        x = saved + h;
        const double up = Evaluate(fn, params);
        x = saved - h;
        const double down = Evaluate(fn, params);
        x = saved;
        return (up - down) / (2.0 * h);
      };
      const double numeric = central(eps);
      const double numeric_half = central(eps / 2.0);
      if (std::abs(numeric - numeric_half) / denom(numeric, numeric_half) >
          options.nonsmooth_tolerance) {
        ++result.coordinates_nonsmooth;
        continue;
      }
      ++result.coordinates_checked;
      const double rel = std::abs(analytic[i] - numeric) / denom(analytic[i], numeric);
      if (rel > result.max_relative_error || std::isnan(rel)) {
        result.max_relative_error = std::isnan(rel) ? INFINITY : rel;
        result.worst_param = p;
        result.worst_index = i;
        result.worst_analytic = analytic[i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace smpkws

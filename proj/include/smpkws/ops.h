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
#include <span>
#include <utility>
#include <vector>

#include "smpkws/tape.h"
#include "smpkws/tensor.h"

namespace smpkws {

// ---------------------------------------------------------------------------
// Value-level kernels (no recording).

Tensor MatMul(const Tensor& a, const Tensor& b);

// Softmax along `axis` of a rank-2 tensor (axis 1 = per row). Inputs must be
// finite; the row maximum is subtracted before exponentiation.
Tensor Softmax(const Tensor& logits, int axis = 1);

// Same-length time convolution with zero extension:
//   out[t] = sum_j kernel[j] * signal[t - (j - half)],   half = (L - 1) / 2.
// The kernel length must be odd.
std::vector<double> ConvolveTime(std::span<const double> signal,
                                 std::span<const double> kernel);

// ---------------------------------------------------------------------------
// Recorded operations. Every function appends one node to the tape.

Var MatMul(Tape& tape, Var a, Var b);
// x: [rows, cols], bias: [cols].
Var AddRowBias(Tape& tape, Var x, Var bias);
Var Add(Tape& tape, Var a, Var b);
Var Scale(Tape& tape, Var x, double factor);
Var Relu(Tape& tape, Var x);
Var Tanh(Tape& tape, Var x);
Var Softmax(Tape& tape, Var logits, int axis = 1);

// Column j of a rank-2 tensor as a rank-1 series.
Var Column(Tape& tape, Var x, std::size_t j);
Var ConvolveTime(Tape& tape, Var series, std::span<const double> kernel);

// Elementwise natural log.
Var Log(Tape& tape, Var x);
// Scalar x[index] (flat index).
Var Pick(Tape& tape, Var x, std::size_t index);
// -log x[index] as a scalar.
Var NegLogAt(Tape& tape, Var x, std::size_t index);
// sum over (row, col) pairs of -log x(row, col), as a scalar.
Var NegLogSum(Tape& tape, Var x, std::span<const std::pair<std::size_t, std::size_t>> cells);
Var Sum(Tape& tape, Var x);
// sum_i weights[i] * terms[i] over scalar terms. Empty input yields 0.
Var WeightedSum(Tape& tape, std::span<const Var> terms, std::span<const double> weights);

// Time filter of an SVDF layer. features: [frames, nodes * rank] per-frame
// feature-filter outputs; weights: [nodes * rank, memory], column memory-1
// applied to the newest frame. Frames before the start of the sequence are
// zero. Returns [frames, nodes], summing the rank components of each node.
Var SvdfTimeFilter(Tape& tape, Var features, Var weights, std::size_t rank);

}  // namespace smpkws

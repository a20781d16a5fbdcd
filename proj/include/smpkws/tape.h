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
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "smpkws/tensor.h"

namespace smpkws {

// Handle to a node on a Tape. Only meaningful for the tape that issued it.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
};

// Linear record of tensor-level operations for reverse-mode differentiation.
// Nodes are appended in evaluation order; Backward replays them in reverse,
// calling each operation's backward function exactly once.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var self)>;

  Var Variable(Tensor value);
  Var Constant(Tensor value);
  // Records an operation. The backward function is dropped when no input
  // requires a gradient.
  Var Record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  Var Record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return Record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t num_operations() const;

  // Gradient buffer of a node; nullptr when the node does not require one.
  // Valid only during and after Backward.
  double* grad_data(Var v);
  // Gradient of a node after Backward (zeros for nodes that need none).
  std::vector<double> grad(Var v) const;

  // Seeds d(root)/d(root) = 1 and propagates. The optional visitor observes
  // the id of every operation node as its backward function runs.
  void Backward(Var root, const std::function<void(std::size_t)>& visitor = {});

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

}  // namespace smpkws

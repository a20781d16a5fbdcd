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

#include "smpkws/tape.h"

#include <algorithm>

#include "smpkws/errors.h"

namespace smpkws {

Var Tape::Variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var{nodes_.size() - 1};
}

Var Tape::Constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var{nodes_.size() - 1};
}

Var Tape::Record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_[in.id].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}});
  return Var{nodes_.size() - 1};
}

std::size_t Tape::num_operations() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return bool(n.backward); }));
}

double* Tape::grad_data(Var v) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
  return n.grad.data();
}

std::vector<double> Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == n.value.size()) return n.grad;
  return std::vector<double>(n.value.size(), 0.0);
}

void Tape::Backward(Var root, const std::function<void(std::size_t)>& visitor) {
  if (!root.valid() || root.id >= nodes_.size()) throw NumericError("backward from invalid node");
  if (nodes_[root.id].value.size() != 1) {
    throw DimensionError("backward root must be a scalar, got shape " +
                         nodes_[root.id].value.shape_string());
  }
  for (Node& n : nodes_) n.grad.clear();
  if (!nodes_[root.id].requires_grad) return;
  grad_data(root)[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward) continue;
    // Nodes never reached by the root still run, with a zero gradient.
    grad_data(Var{i});
    if (visitor) visitor(i);
    n.backward(*this, Var{i});
  }
}

}  // namespace smpkws

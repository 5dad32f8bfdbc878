// Copyright 2026 The Matchbox Authors
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

#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "matchbox/error.h"

namespace matchbox::nn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

enum class Mode { Train, Eval };

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace detail {
inline thread_local bool grad_enabled = true;
}

/// While alive, operations on this thread do not record a backward graph.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Row-major dense array with an optional gradient buffer. Copies share
/// storage; use clone() for a deep copy.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using BackwardFn = std::function<void(const Array& out_grad)>;

  struct Node {
    Shape shape;
    Array data;
    Array grad;
    bool requires_grad = false;
    bool released = false;
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward;

    /// grad += g, allocating the buffer on first use.
    template <typename Derived>
    void accumulate(const Eigen::ArrayBase<Derived>& g) {
      if (!requires_grad) return;
      if (grad.size() == 0) grad = Array::Zero(data.size());
      grad += g;
    }
    Array& grad_buffer() {
      if (grad.size() == 0) grad = Array::Zero(data.size());
      return grad;
    }
  };
  using NodePtr = std::shared_ptr<Node>;

  Tensor() : node_(std::make_shared<Node>()) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const Index n = shape_size(shape);
    return from(std::move(shape), Array::Zero(n), requires_grad);
  }

  static Tensor from(Shape shape, Array data, bool requires_grad = false) {
    if (shape_size(shape) != data.size())
      fail(ErrorCode::ShapeMismatch, "data length " + std::to_string(data.size()) +
                                         " does not match shape " + shape_string(shape));
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  /// Result of an operation. The graph edge is recorded only when some
  /// parent requires a gradient and recording is enabled.
  static Tensor result(Shape shape, Array data, std::vector<NodePtr> parents, BackwardFn fn) {
    Tensor t = from(std::move(shape), std::move(data));
    if (!detail::grad_enabled) return t;
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    if (!needs) return t;
    t.node_->requires_grad = true;
    t.node_->parents = std::move(parents);
    t.node_->backward = std::move(fn);
    return t;
  }

  const Shape& shape() const { return node_->shape; }
  Index dim(std::size_t i) const { return node_->shape.at(i); }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index size() const { return node_->data.size(); }

  Array& data() { return node_->data; }
  const Array& data() const { return node_->data; }
  Scalar item() const { return node_->data[0]; }

  /// Gradient buffer; zeros when nothing has been accumulated.
  Array& grad() { return node_->grad_buffer(); }
  const Array& grad() const { return node_->grad_buffer(); }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad = Array(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_graph() const { return static_cast<bool>(node_->backward); }

  Tensor clone() const { return from(shape(), data(), requires_grad()); }
  Tensor detach() const { return from(shape(), data(), false); }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Reverse-mode pass from a scalar. Accumulates into every reachable tensor
/// that requires a gradient and releases the recorded graph afterwards.
template <typename Scalar>
void backward(Tensor<Scalar>& loss) {
  using Node = typename Tensor<Scalar>::Node;
  if (loss.size() != 1) fail(ErrorCode::ShapeMismatch, "backward() needs a scalar loss");
  auto root = loss.node();
  if (!root->requires_grad || root->released)
    fail(ErrorCode::NoGraph, "loss has no recorded graph");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->accumulate(Tensor<Scalar>::Array::Ones(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(node->grad);
  }
  for (Node* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->parents.clear();
      node->released = true;
    }
  }
}

}  // namespace matchbox::nn

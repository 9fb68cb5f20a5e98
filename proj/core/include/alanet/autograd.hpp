/* Copyright 2026 The ALA-Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ALANET_AUTOGRAD_HPP_
#define ALANET_AUTOGRAD_HPP_

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "alanet/geometry.hpp"
#include "alanet/tensor.hpp"

// Reverse-mode automatic differentiation over Tensor. Every op records a
// closure that maps the output gradient onto its inputs; backward() replays
// them in reverse topological order. Graphs are built per forward pass and
// released with the last Var that references them.
namespace alanet::ag {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  // Zero-initialized gradient buffer of the value's shape.
  Tensor& grad_buffer();
  void accumulate(const Tensor& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  explicit operator bool() const { return defined(); }

  void zero_grad() { node_->grad = Tensor(); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
Var parameter(Tensor value);

// Builds an op result. `backward` runs only when some input requires grad.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

// Seeds d(root)/d(root) = 1 for a single-element root.
void backward(const Var& root);

Var add(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var relu(const Var& x);

// x: N x D, weight: O x D, bias: O  ->  N x O.
Var linear(const Var& x, const Var& weight, const Var& bias);

// x: N x C x H x W, weight: O x C x k x k, bias: O (may be undefined).
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);

Var max_pool2d(const Var& x, int kernel, int stride, int pad);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-channel normalization; batch statistics (and running-stat updates) in
// training mode, running statistics otherwise.
Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state,
                 bool training);

// N x C x H x W -> N x C.
Var global_avg_pool(const Var& x);

// N x ... -> N x prod(...).
Var flatten(const Var& x);

// Concatenation of N x D_i blocks along the feature axis.
Var concat_cols(std::span<const Var> parts);

// R x D -> (R / segment) x D: elementwise max over consecutive row groups.
// Ties route the gradient to the first maximal row.
Var segment_max(const Var& x, int segment);

// table: V x D -> N x D rows selected by `indices`.
Var embedding(const Var& table, std::span<const int> indices);

// N x (A*k) x H x W -> N x (H*W*A) x k, matching AnchorGrid ordering.
Var to_anchor_major(const Var& x, int anchors_per_cell);

struct RoiRef {
  int image = 0;
  Box box;
};

// feature: N x C x H x W -> R x C x out_h x out_w. Differentiable with respect
// to the feature map only; box coordinates are treated as constants.
Var roi_align(const Var& feature, std::span<const RoiRef> rois, const RoiAlignParams& params);

// Mean over rows of the ordinal loss; logits: R x (K-1), one target per row.
Var ordinal_loss(const Var& logits, std::span<const int> targets);

}  // namespace alanet::ag

#endif  // ALANET_AUTOGRAD_HPP_

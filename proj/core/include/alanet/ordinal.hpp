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

#ifndef ALANET_ORDINAL_HPP_
#define ALANET_ORDINAL_HPP_

#include <span>
#include <vector>

// Ordinal regression over K integer ranks, cast as K-1 cumulative binary
// problems "is y > k" for k = 0..K-2. A model emits K-1 logits; the predicted
// rank is the sum of their sigmoids.
namespace alanet::ordinal {

inline constexpr int kDefaultRanks = 240;

/// Binary threshold vector of length K-1 for rank y: element k is 1 iff y > k.
/// Throws InvalidInput unless 0 <= y < K and K >= 2.
std::vector<double> encode_rank(int y, int num_ranks);

double sigmoid(double z);

// Numerically stable BCE-with-logits: max(z, 0) - z*t + log1p(exp(-|z|)).
double bce_with_logits(double logit, double target);

/// Mean binary cross-entropy between sigmoid(logits) and encode_rank(y, K),
/// with K = logits.size() + 1.
double loss(std::span<const double> logits, int y);

struct LossWithGrad {
  double value = 0.0;
  std::vector<double> grad;  // d loss / d logits
};

// Loss and its analytic gradient, (sigmoid(z_k) - t_k) / (K-1).
LossWithGrad loss_and_grad(std::span<const double> logits, int y);

/// Predicted rank as the plain sum of threshold probabilities. No monotone
/// projection is applied.
double decode_age(std::span<const double> probabilities);

// decode_age(sigmoid(logits)).
double decode_logits(std::span<const double> logits);

}  // namespace alanet::ordinal

#endif  // ALANET_ORDINAL_HPP_

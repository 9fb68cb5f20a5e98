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

#include "alanet/ordinal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "alanet/error.hpp"

namespace alanet::ordinal {

std::vector<double> encode_rank(int y, int num_ranks) {
  if (num_ranks < 2) throw InvalidInput("ordinal: rank count must be at least 2");
  if (y < 0 || y >= num_ranks) {
    throw InvalidInput("ordinal: rank " + std::to_string(y) + " outside [0, " +
                       std::to_string(num_ranks) + ")");
  }
  std::vector<double> t(static_cast<std::size_t>(num_ranks - 1), 0.0);
  for (int k = 0; k < y; ++k) t[static_cast<std::size_t>(k)] = 1.0;
  return t;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_with_logits(double logit, double target) {
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

double loss(std::span<const double> logits, int y) {
  const int k_minus_1 = static_cast<int>(logits.size());
  const auto targets = encode_rank(y, k_minus_1 + 1);
  double acc = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) acc += bce_with_logits(logits[k], targets[k]);
  return acc / k_minus_1;
}

LossWithGrad loss_and_grad(std::span<const double> logits, int y) {
  const int k_minus_1 = static_cast<int>(logits.size());
  const auto targets = encode_rank(y, k_minus_1 + 1);
  LossWithGrad out;
  out.grad.resize(logits.size());
  const double inv = 1.0 / k_minus_1;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out.value += bce_with_logits(logits[k], targets[k]);
    out.grad[k] = (sigmoid(logits[k]) - targets[k]) * inv;
  }
  out.value *= inv;
  return out;
}

double decode_age(std::span<const double> probabilities) {
  double sum = 0.0;
  for (double p : probabilities) sum += p;
  return sum;
}

double decode_logits(std::span<const double> logits) {
  double sum = 0.0;
  for (double z : logits) sum += sigmoid(z);
  return sum;
}

}  // namespace alanet::ordinal

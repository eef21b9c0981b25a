// Copyright 2026 The protomatch Authors. All Rights Reserved.
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

#include <Eigen/Dense>

#include "protomatch/common.hpp"
#include "protomatch/pseudo_labels.hpp"

namespace protomatch {

struct LossBreakdown {
  double source_seg = 0.0;
  double target_seg = 0.0;
  double proto = 0.0;
  double total = 0.0;

  static LossBreakdown of(double source_seg, double target_seg, double proto) {
    return {source_seg, target_seg, proto, source_seg + target_seg + proto};
  }
  bool operator==(const LossBreakdown&) const = default;
};

/// Summed loss plus its gradient with respect to the pre-softmax logits,
/// (C+1) x (H*W).
struct SegLossGrad {
  double loss = 0.0;
  Eigen::MatrixXd logit_grad;
};

inline constexpr double kProbClamp = 1e-12;

/// Pixel cross-entropy against one-hot rows, summed over pixels. Throws
/// ArgumentError when a label column is not one-hot.
SegLossGrad source_seg_loss(const ProbabilityMap& probs, const Eigen::MatrixXd& onehot);

/// Convenience overload for an integer label grid with values in 0..C.
SegLossGrad source_seg_loss(const ProbabilityMap& probs, const LabelMap& labels);

/// sum_j w_j * q_t * -log p_j(pseudo_j). Unknown pixels train head C.
SegLossGrad target_seg_loss(const ProbabilityMap& probs, const PseudoLabelMap& pseudo);

Eigen::MatrixXd one_hot(const LabelMap& labels, int num_heads);

}  // namespace protomatch

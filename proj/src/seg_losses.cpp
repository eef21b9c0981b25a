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

#include "protomatch/seg_losses.hpp"

#include <algorithm>
#include <cmath>

namespace protomatch {
namespace {

void check_labels(const ProbabilityMap& probs, const LabelMap& labels, const char* who) {
  if (!labels.same_shape(probs.height, probs.width) ||
      probs.data.cols() != static_cast<Eigen::Index>(labels.size())) {
    throw ShapeError(std::string(who) + ": label grid does not match probabilities");
  }
  const int heads = static_cast<int>(probs.data.rows());
  for (const int cls : labels.values) {
    if (cls < 0 || cls >= heads) {
      throw LookupError(std::string(who) + ": label " + std::to_string(cls) +
                        " outside 0.." + std::to_string(heads - 1));
    }
  }
}

}  // namespace

Eigen::MatrixXd one_hot(const LabelMap& labels, int num_heads) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(num_heads, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0 || labels[j] >= num_heads) throw LookupError("one_hot: label out of range");
    out(labels[j], static_cast<Eigen::Index>(j)) = 1.0;
  }
  return out;
}

SegLossGrad source_seg_loss(const ProbabilityMap& probs, const Eigen::MatrixXd& onehot) {
  if (onehot.rows() != probs.data.rows() || onehot.cols() != probs.data.cols()) {
    throw ShapeError("source_seg_loss: one-hot matrix does not match probabilities");
  }
  LabelMap labels(probs.height, probs.width, 0);
  for (Eigen::Index j = 0; j < onehot.cols(); ++j) {
    int hot = -1;
    for (Eigen::Index c = 0; c < onehot.rows(); ++c) {
      const double v = onehot(c, j);
      if (v == 1.0 && hot < 0) {
        hot = static_cast<int>(c);
      } else if (v != 0.0) {
        hot = -2;
        break;
      }
    }
    if (hot < 0) {
      throw ArgumentError("source_seg_loss: label column " + std::to_string(j) +
                          " is not one-hot");
    }
    labels[static_cast<std::size_t>(j)] = hot;
  }
  return source_seg_loss(probs, labels);
}

SegLossGrad source_seg_loss(const ProbabilityMap& probs, const LabelMap& labels) {
  check_labels(probs, labels, "source_seg_loss");
  SegLossGrad out;
  out.logit_grad = probs.data;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    out.loss -= std::log(std::max(probs.data(labels[j], col), kProbClamp));
    out.logit_grad(labels[j], col) -= 1.0;
  }
  return out;
}

SegLossGrad target_seg_loss(const ProbabilityMap& probs, const PseudoLabelMap& pseudo) {
  check_labels(probs, pseudo.classes, "target_seg_loss");
  if (!pseudo.weights.same_shape(pseudo.classes)) {
    throw ShapeError("target_seg_loss: weight grid does not match labels");
  }
  SegLossGrad out;
  out.logit_grad = probs.data;
  const double q = pseudo.reliability;
  for (std::size_t j = 0; j < pseudo.classes.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    const int cls = pseudo.classes[j];
    const double scale = pseudo.weights[j] * q;
    out.loss -= scale * std::log(std::max(probs.data(cls, col), kProbClamp));
    out.logit_grad.col(col) *= scale;
    out.logit_grad(cls, col) -= scale;
  }
  return out;
}

}  // namespace protomatch

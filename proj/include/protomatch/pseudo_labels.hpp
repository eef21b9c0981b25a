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

#include <span>
#include <string>

#include <Eigen/Dense>

#include "protomatch/common.hpp"

namespace protomatch {

/// Teacher pseudo-labels for one target image. Classes are head indices in
/// 0..C, where C is unknown. `weights` holds the per-pixel loss weight: the
/// scaling factor for pixels assigned a known class and 1 for unknown pixels.
struct PseudoLabelMap {
  LabelMap classes;
  Grid<double> confidence;  // unscaled known-class max
  WeightMap weights;
  double reliability = 1.0;
  int num_classes = 0;

  bool operator==(const PseudoLabelMap&) const = default;
};

enum class ReliabilityScope { kKnownClasses, kAllHeads };

/// Pixel j gets argmax over known heads when max * w_j >= tau_p and the
/// unknown index otherwise. Ties go to the lowest index. Reliability stays at
/// its default of 1 until the caller fills it from image_reliability().
PseudoLabelMap assign_pseudo_labels(const ProbabilityMap& teacher_probs,
                                    const WeightMap& weights, double tau_p);

/// Same as above with w == 1 everywhere.
PseudoLabelMap assign_pseudo_labels(const ProbabilityMap& teacher_probs,
                                    double tau_p);

/// Fraction of pixels whose max probability is >= tau_t.
double image_reliability(const ProbabilityMap& teacher_probs, double tau_t,
                         ReliabilityScope scope = ReliabilityScope::kKnownClasses);

/// alpha * teacher + (1 - alpha) * student.
Eigen::VectorXd ema_update(const Eigen::VectorXd& teacher,
                           const Eigen::VectorXd& student, double alpha);

/// Writes `<stem>.ppm` (palette colours) and `<stem>.json` with the
/// thresholds and reliability.
void dump_pseudo_labels(const PseudoLabelMap& pseudo, double tau_p, double tau_t,
                        const std::string& stem);

}  // namespace protomatch

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

#include "protomatch/pseudo_labels.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "protomatch/image_io.hpp"

namespace protomatch {
namespace {

void check_probs(const ProbabilityMap& probs, const char* who) {
  if (probs.data.rows() < 2) {
    throw ShapeError(std::string(who) + ": need at least one known head plus unknown");
  }
  if (probs.data.cols() != probs.pixels()) {
    throw ShapeError(std::string(who) + ": probability grid shape mismatch");
  }
}

}  // namespace

PseudoLabelMap assign_pseudo_labels(const ProbabilityMap& teacher_probs,
                                    const WeightMap& weights, double tau_p) {
  check_probs(teacher_probs, "assign_pseudo_labels");
  if (!(tau_p > 0.0 && tau_p <= 1.0)) {
    throw ArgumentError("assign_pseudo_labels: tau_p must lie in (0, 1]");
  }
  if (!weights.same_shape(teacher_probs.height, teacher_probs.width)) {
    throw ShapeError("assign_pseudo_labels: weight grid shape mismatch");
  }
  const int known = static_cast<int>(teacher_probs.data.rows()) - 1;
  const int h = teacher_probs.height;
  const int w = teacher_probs.width;

  PseudoLabelMap out;
  out.num_classes = known;
  out.classes = LabelMap(h, w, known);
  out.confidence = Grid<double>(h, w, 0.0);
  out.weights = WeightMap(h, w, 1.0);
  for (int j = 0; j < h * w; ++j) {
    const auto col = teacher_probs.data.col(j);
    int best = 0;
    for (int c = 1; c < known; ++c) {
      if (col(c) > col(best)) best = c;
    }
    const double conf = col(best);
    out.confidence[j] = conf;
    if (conf * weights[j] >= tau_p) {
      out.classes[j] = best;
      out.weights[j] = weights[j];
    }
  }
  return out;
}

PseudoLabelMap assign_pseudo_labels(const ProbabilityMap& teacher_probs,
                                    double tau_p) {
  return assign_pseudo_labels(
      teacher_probs, WeightMap(teacher_probs.height, teacher_probs.width, 1.0), tau_p);
}

double image_reliability(const ProbabilityMap& teacher_probs, double tau_t,
                         ReliabilityScope scope) {
  check_probs(teacher_probs, "image_reliability");
  if (!(tau_t > 0.0 && tau_t <= 1.0)) {
    throw ArgumentError("image_reliability: tau_t must lie in (0, 1]");
  }
  const Eigen::Index rows = scope == ReliabilityScope::kKnownClasses
                                ? teacher_probs.data.rows() - 1
                                : teacher_probs.data.rows();
  const Eigen::Index n = teacher_probs.data.cols();
  if (n == 0) return 0.0;
  Eigen::Index above = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (teacher_probs.data.col(j).head(rows).maxCoeff() >= tau_t) ++above;
  }
  return static_cast<double>(above) / static_cast<double>(n);
}

Eigen::VectorXd ema_update(const Eigen::VectorXd& teacher,
                           const Eigen::VectorXd& student, double alpha) {
  if (teacher.size() != student.size()) {
    throw ShapeError("ema_update: parameter vectors differ in length");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ArgumentError("ema_update: alpha must lie in [0, 1]");
  }
  if (alpha == 1.0) return teacher;
  if (alpha == 0.0) return student;
  // Clamped per coordinate so rounding never leaves the segment
  // [student, teacher].
  Eigen::VectorXd out(teacher.size());
  for (Eigen::Index k = 0; k < teacher.size(); ++k) {
    const double t = teacher(k);
    const double s = student(k);
    out(k) = std::clamp(alpha * t + (1.0 - alpha) * s, std::min(t, s), std::max(t, s));
  }
  return out;
}

void dump_pseudo_labels(const PseudoLabelMap& pseudo, double tau_p, double tau_t,
                        const std::string& stem) {
  write_ppm(stem + ".ppm", colorize_labels(pseudo.classes, pseudo.num_classes));
  nlohmann::json j;
  j["tau_p"] = tau_p;
  j["tau_t"] = tau_t;
  j["q_t"] = pseudo.reliability;
  j["num_classes"] = pseudo.num_classes;
  std::ofstream(stem + ".json") << j.dump(2) << "\n";
}

}  // namespace protomatch

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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "protomatch/common.hpp"
#include "protomatch/synth_bench.hpp"

namespace protomatch {

/// Dataset-level evaluation on the target domain. IoU values are fractions in
/// [0, 1]; tables render them as percentages.
struct MetricsReport {
  /// Keyed by global class id of each common class. Classes with neither
  /// ground-truth nor predicted pixels are absent.
  std::map<int, double> per_class_iou;
  double common_miou = 0.0;
  /// IoU of the unknown prediction against the collapsed target-private
  /// ground truth; empty when the scenario has no target-private pixels and
  /// nothing was predicted unknown.
  std::optional<double> private_iou;
  double h_score = 0.0;
  /// Rows: common classes in scenario order, then the collapsed unknown row.
  /// Columns: source heads 0..C_s-1, then unknown.
  std::vector<std::vector<std::int64_t>> confusion;
  std::int64_t pixels = 0;

  bool operator==(const MetricsReport&) const = default;
};

/// 2ab/(a+b), 0 when both are 0. Throws ArgumentError on negative input.
double h_score(double common, double priv);

/// `predictions` use head indices 0..C_s (C_s = unknown); `ground_truth` uses
/// global ids of the target class set.
MetricsReport evaluate(const std::vector<LabelMap>& predictions,
                       const std::vector<LabelMap>& ground_truth,
                       const ScenarioConfig& scenario);

std::string report_to_json(const MetricsReport& report, const ScenarioConfig& scenario);

/// Aligned text table: one column per common class, then Common / Private /
/// H-score, all in percent.
std::string report_table(const std::vector<std::pair<std::string, MetricsReport>>& rows,
                         const ScenarioConfig& scenario);

}  // namespace protomatch

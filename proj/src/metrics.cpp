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

#include "protomatch/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace protomatch {

double h_score(double common, double priv) {
  if (common < 0.0 || priv < 0.0) throw ArgumentError("h_score: negative input");
  const double s = common + priv;
  return s == 0.0 ? 0.0 : 2.0 * common * priv / s;
}

MetricsReport evaluate(const std::vector<LabelMap>& predictions,
                       const std::vector<LabelMap>& ground_truth,
                       const ScenarioConfig& scenario) {
  if (predictions.empty()) throw ArgumentError("evaluate: empty evaluation set");
  if (predictions.size() != ground_truth.size()) {
    throw ShapeError("evaluate: prediction and ground-truth counts differ");
  }
  const int heads = scenario.num_source_classes() + 1;
  const int unknown_head = heads - 1;
  const int num_common = static_cast<int>(scenario.common_classes.size());
  const int unknown_row = num_common;

  // Global target id -> confusion row.
  std::map<int, int> row_of;
  for (int k = 0; k < num_common; ++k) row_of[scenario.common_classes[k]] = k;
  for (const int c : scenario.target_private) row_of[c] = unknown_row;

  MetricsReport r;
  r.confusion.assign(static_cast<std::size_t>(num_common) + 1,
                     std::vector<std::int64_t>(static_cast<std::size_t>(heads), 0));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& pred = predictions[i];
    const auto& gt = ground_truth[i];
    if (!pred.same_shape(gt)) throw ShapeError("evaluate: image shapes differ");
    for (std::size_t j = 0; j < gt.size(); ++j) {
      const auto it = row_of.find(gt[j]);
      if (it == row_of.end()) {
        throw LookupError("evaluate: ground-truth class " + std::to_string(gt[j]) +
                          " is not a target class");
      }
      const int p = pred[j];
      if (p < 0 || p >= heads) throw LookupError("evaluate: prediction out of range");
      ++r.confusion[it->second][p];
      ++r.pixels;
    }
  }
  if (r.pixels == 0) throw ArgumentError("evaluate: no pixels to evaluate");

  std::vector<std::int64_t> col_sum(static_cast<std::size_t>(heads), 0);
  for (const auto& row : r.confusion) {
    for (int c = 0; c < heads; ++c) col_sum[c] += row[c];
  }
  auto row_sum = [&](int row) {
    std::int64_t s = 0;
    for (const auto v : r.confusion[row]) s += v;
    return s;
  };

  double sum = 0.0;
  int defined = 0;
  for (int k = 0; k < num_common; ++k) {
    const int head = k;  // common classes lead the source label space
    const auto tp = r.confusion[k][head];
    const auto uni = row_sum(k) + col_sum[head] - tp;
    if (uni == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    r.per_class_iou[scenario.common_classes[k]] = iou;
    sum += iou;
    ++defined;
  }
  r.common_miou = defined > 0 ? sum / defined : 0.0;

  const auto tp_unknown = r.confusion[unknown_row][unknown_head];
  const auto uni_unknown = row_sum(unknown_row) + col_sum[unknown_head] - tp_unknown;
  if (uni_unknown > 0) {
    r.private_iou = static_cast<double>(tp_unknown) / static_cast<double>(uni_unknown);
  } else if (scenario.has_target_private()) {
    r.private_iou.reset();
  }
  r.h_score = r.private_iou ? h_score(r.common_miou, *r.private_iou) : r.common_miou;
  return r;
}

std::string report_to_json(const MetricsReport& report, const ScenarioConfig& scenario) {
  nlohmann::json j;
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [cls, iou] : report.per_class_iou) per[std::to_string(cls)] = iou;
  j["scenario"] = scenario.name;
  j["per_class_iou"] = per;
  j["common_miou"] = report.common_miou;
  j["private_iou"] = report.private_iou ? nlohmann::json(*report.private_iou) : nlohmann::json();
  j["h_score"] = report.h_score;
  j["confusion"] = report.confusion;
  j["pixels"] = report.pixels;
  return j.dump(2);
}

std::string report_table(const std::vector<std::pair<std::string, MetricsReport>>& rows,
                         const ScenarioConfig& scenario) {
  std::size_t name_width = 6;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
  std::ostringstream out;
  char buf[64];
  out << std::string(name_width, ' ');
  for (const int c : scenario.common_classes) {
    std::snprintf(buf, sizeof(buf), " %7s", ("c" + std::to_string(c)).c_str());
    out << buf;
  }
  out << "   Common  Private  H-score\n";
  for (const auto& [name, rep] : rows) {
    out << name << std::string(name_width - name.size(), ' ');
    for (const int c : scenario.common_classes) {
      const auto it = rep.per_class_iou.find(c);
      if (it == rep.per_class_iou.end()) {
        std::snprintf(buf, sizeof(buf), " %7s", "-");
      } else {
        std::snprintf(buf, sizeof(buf), " %7.2f", 100.0 * it->second);
      }
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), " %8.2f", 100.0 * rep.common_miou);
    out << buf;
    if (rep.private_iou) {
      std::snprintf(buf, sizeof(buf), " %8.2f", 100.0 * *rep.private_iou);
    } else {
      std::snprintf(buf, sizeof(buf), " %8s", "-");
    }
    out << buf;
    std::snprintf(buf, sizeof(buf), " %8.2f\n", 100.0 * rep.h_score);
    out << buf;
  }
  return out.str();
}

}  // namespace protomatch

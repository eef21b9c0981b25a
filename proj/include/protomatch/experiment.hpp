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
#include <functional>
#include <string>
#include <vector>

#include "protomatch/dspd_losses.hpp"
#include "protomatch/metrics.hpp"
#include "protomatch/pseudo_labels.hpp"
#include "protomatch/seg_losses.hpp"
#include "protomatch/synth_bench.hpp"
#include "protomatch/toy_net.hpp"

namespace protomatch {

struct HyperParams {
  double tau_p = 0.5;     // unknown-assignment threshold
  double tau_t = 0.968;   // reliability threshold
  double lambda1 = 0.01;  // contrastive prototype loss weight
  double lambda2 = 0.01;  // distance prototype loss weight
  double tau = 0.1;       // contrastive temperature
  double T = 0.01;        // rarity temperature
  double alpha = 0.999;   // EMA factor
  double sigma = 1.0;     // gaussian weight variant width

  bool operator==(const HyperParams&) const = default;
};

struct Toggles {
  bool dspd_loss = false;
  bool dspd_weight = false;
  bool tim_matching = false;
  bool target_rcs = false;
  bool class_mix = false;
  WeightVariant weight_variant = WeightVariant::kOurs;

  bool operator==(const Toggles&) const = default;
};

struct ExperimentConfig {
  ScenarioConfig scenario = scenario_presets("open_partial");
  HyperParams hyper;
  Toggles toggles;
  int steps = 2000;
  int batch = 1;  // source/target image pairs per step
  std::uint64_t seed = 0;
  double lr = 1e-2;
  double weight_decay = 1e-4;
  double momentum = 0.0;

  int patch_radius = 2;
  std::vector<int> hidden = {64, 64};
  int embed_dim = 0;  // 0 means 2C+1

  int rcs_refresh = 50;  // steps between target pseudo-label count refreshes
  int tim_top_k = 1;     // 1 = strict argmax
  bool proto_weight_by_reliability = false;
  bool proto_on_unknown = true;  // pull unknown-labeled target pixels to the unknown prototype
  ReliabilityScope reliability_scope = ReliabilityScope::kKnownClasses;
  int eval_every = 0;  // 0 = final evaluation only

  int num_classes() const { return scenario.num_source_classes(); }
  int resolved_embed_dim() const { return embed_dim > 0 ? embed_dim : 2 * num_classes() + 1; }
  NetArchitecture architecture() const;
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

struct StepLog {
  int step = 0;
  LossBreakdown losses;
  double reliability = 0.0;
  double unknown_fraction = 0.0;
  int target_image = 0;
  int source_image = 0;

  bool operator==(const StepLog&) const = default;
};

/// Everything the training loop saw while building one target batch entry.
struct StepTrace {
  int step = 0;
  int target_image = 0;
  int source_image = 0;
  const ProbabilityMap* teacher_probs = nullptr;
  const WeightMap* weights = nullptr;
  const PseudoLabelMap* pseudo = nullptr;
};

struct TrainHooks {
  std::function<void(const StepTrace&)> on_pseudo_labels;
  std::function<void(int step, const MetricsReport&)> on_eval;
};

struct TrainResult {
  PixelNet student;
  PixelNet teacher;
  MetricsReport report;
  std::vector<StepLog> log;
  std::vector<std::pair<int, MetricsReport>> checkpoints;  // periodic evals
};

TrainResult train(const ExperimentConfig& config, const DomainPair& data,
                  const TrainHooks& hooks = {});

/// Generates the scenario's datasets and trains on them.
TrainResult train(const ExperimentConfig& config, const TrainHooks& hooks = {});

/// Argmax over all C+1 heads for every target image.
std::vector<LabelMap> predict(const PixelNet& net, const TargetDataset& target);

MetricsReport evaluate_model(const PixelNet& net, const DomainPair& data);

std::string loss_log_csv(const std::vector<StepLog>& log);

struct AblationCell {
  std::string name;
  std::function<void(ExperimentConfig&)> apply;
};

/// Named grids: "ladder", "weights", "proto", "tim".
std::vector<AblationCell> ablation_grid(const std::string& name);

struct AblationRow {
  std::string name;
  std::vector<MetricsReport> reports;  // one per seed
  std::vector<std::vector<StepLog>> logs;  // one per seed
  double common_mean = 0.0, common_std = 0.0;
  double private_mean = 0.0, private_std = 0.0;
  double h_mean = 0.0, h_std = 0.0;
};

/// Runs every cell for seeds base.seed, base.seed+1, ...; each run uses its
/// seed both for training and for the scenario data. `jobs` > 1 runs cells on
/// worker threads.
std::vector<AblationRow> ablate(const ExperimentConfig& base,
                                const std::vector<AblationCell>& grid, int num_seeds,
                                int jobs = 1);

/// Table with mean +- std of Common / Private / H-score in percent.
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace protomatch

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
#include <string_view>

#include <Eigen/Dense>

#include "protomatch/common.hpp"
#include "protomatch/etf_bank.hpp"

namespace protomatch {

struct ProtoLossConfig {
  double lambda1 = 0.01;  // contrastive term weight
  double lambda2 = 0.01;  // distance term weight
  double tau = 0.1;       // contrastive temperature
  double sigma = 1.0;     // width of the gaussian weight variant

  void validate() const;
};

enum class WeightVariant { kOurs, kAbs, kGaussian, kMean };

WeightVariant parse_weight_variant(std::string_view name);
const char* to_string(WeightVariant v);

/// Loss value and its gradient with respect to the L2-normalized embedding.
struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

using EmbeddingRef = Eigen::Ref<const Eigen::VectorXd>;

/// Softmax cross-entropy of i.p over the same-domain prototypes: C source
/// prototypes for Domain::kSource, C+1 target prototypes (unknown included)
/// for Domain::kTarget.
LossGrad proto_ce_loss(const EmbeddingRef& embedding, int cls, Domain domain,
                       const PrototypeBank& bank);

/// Pixel-prototype contrastive loss. Positives are {p_s^c, p_t^c} for a known
/// class and {p_t^unknown} for cls == C; every other prototype is a negative.
LossGrad ppc_loss(const EmbeddingRef& embedding, int cls, const PrototypeBank& bank,
                  double tau);

/// (1 - i.p_D^c)^2.
LossGrad ppd_loss(const EmbeddingRef& embedding, int cls, Domain domain,
                  const PrototypeBank& bank);

/// ce + lambda1 * ppc + lambda2 * ppd.
LossGrad proto_loss(const EmbeddingRef& embedding, int cls, Domain domain,
                    const PrototypeBank& bank, const ProtoLossConfig& config);

/// Batched proto_loss over the columns of `units` (already L2-normalized,
/// d x N). Pixel j uses classes[j] and domains[j]; each pixel's loss is scaled
/// by scales[j] (empty span = 1). Returns the scaled loss sum and the
/// d x N gradient with respect to `units`.
struct BatchLossGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad;
};
BatchLossGrad proto_loss_batch(const Eigen::MatrixXd& units, std::span<const int> classes,
                               std::span<const Domain> domains, const PrototypeBank& bank,
                               const ProtoLossConfig& config,
                               std::span<const double> scales = {});

/// Pixel weight from the cosine similarities to the class's source and target
/// prototypes. Inputs must lie in [-1, 1] up to 1e-9.
double weight_scale(double ds, double dt, WeightVariant variant, double sigma = 1.0);

/// Per-pixel weights for a class grid. Pixels whose class is the unknown
/// index (bank.num_classes()) get weight 1.
WeightMap weight_map(const EmbeddingMap& embeddings, const LabelMap& classes,
                     const PrototypeBank& bank, WeightVariant variant,
                     double sigma = 1.0);

}  // namespace protomatch

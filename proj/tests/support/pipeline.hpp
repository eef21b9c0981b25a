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

// A two-image micro-batch loss (source + target segmentation + prototype
// terms) composed from library pieces, with its analytic parameter gradient.

#include <random>
#include <vector>

#include "protomatch/dspd_losses.hpp"
#include "protomatch/etf_bank.hpp"
#include "protomatch/pseudo_labels.hpp"
#include "protomatch/seg_losses.hpp"
#include "protomatch/toy_net.hpp"

namespace protomatch::testing {

struct MicroBatch {
  Image source_image;
  LabelMap source_labels;  // heads 0..C-1
  Image target_image;
  PseudoLabelMap target_pseudo;  // heads 0..C
};

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

// Freshly built nets have zero biases, so a pixel whose hidden units are all
// off embeds to the zero vector. Jittering every parameter avoids that.
inline PixelNet jittered(PixelNet net, std::mt19937_64& rng, double scale = 0.3) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::VectorXd p = net.params();
  for (auto& v : p) v += n(rng);
  net.set_params(p);
  return net;
}

inline double proto_mean(const NetOutput& out, const std::vector<int>& classes, Domain domain,
                         const PrototypeBank& bank, const ProtoLossConfig& cfg,
                         Eigen::MatrixXd* raw_grad) {
  const Eigen::MatrixXd units = normalize_columns(out.embeddings.data);
  const std::vector<Domain> domains(classes.size(), domain);
  const auto r = proto_loss_batch(units, classes, domains, bank, cfg);
  const double n = static_cast<double>(units.cols());
  if (raw_grad) *raw_grad = normalized_to_raw_grad(out.embeddings.data, r.grad / n);
  return r.loss / n;
}

inline LossAndGrad micro_batch_loss(const PixelNet& net, const MicroBatch& b,
                                    const PrototypeBank& bank, const ProtoLossConfig& cfg,
                                    bool with_grad) {
  const auto s = net.forward(b.source_image);
  const auto t = net.forward(b.target_image);
  const double ns = s.probs.pixels();
  const double nt = t.probs.pixels();
  auto ls = source_seg_loss(s.probs, b.source_labels);
  auto lt = target_seg_loss(t.probs, b.target_pseudo);
  Eigen::MatrixXd gs, gt;
  const double ps = proto_mean(s, b.source_labels.values, Domain::kSource, bank, cfg,
                               with_grad ? &gs : nullptr);
  const double pt = proto_mean(t, b.target_pseudo.classes.values, Domain::kTarget, bank, cfg,
                               with_grad ? &gt : nullptr);
  LossAndGrad out;
  out.loss = ls.loss / ns + lt.loss / nt + ps + pt;
  if (with_grad) {
    out.grad = net.backward(s, ls.logit_grad / ns, gs) + net.backward(t, lt.logit_grad / nt, gt);
  }
  return out;
}

}  // namespace protomatch::testing

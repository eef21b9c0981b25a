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

#include "protomatch/dspd_losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace protomatch {
namespace {

void require_embedding(const EmbeddingRef& e, const PrototypeBank& bank,
                       const char* who) {
  if (e.size() != bank.embed_dim()) {
    throw DimensionError(std::string(who) + ": embedding dimension " +
                         std::to_string(e.size()) + " != " +
                         std::to_string(bank.embed_dim()));
  }
}

double log_sum_exp(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

}  // namespace

void ProtoLossConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw ArgumentError("ProtoLossConfig: lambdas must be >= 0");
  }
  if (!(tau > 0.0)) throw ArgumentError("ProtoLossConfig: tau must be > 0");
  if (!(sigma > 0.0)) throw ArgumentError("ProtoLossConfig: sigma must be > 0");
}

WeightVariant parse_weight_variant(std::string_view name) {
  if (name == "ours" || name == "harmonic") return WeightVariant::kOurs;
  if (name == "abs") return WeightVariant::kAbs;
  if (name == "gaussian") return WeightVariant::kGaussian;
  if (name == "mean") return WeightVariant::kMean;
  throw ArgumentError("unknown weight variant '" + std::string(name) + "'");
}

const char* to_string(WeightVariant v) {
  switch (v) {
    case WeightVariant::kOurs: return "ours";
    case WeightVariant::kAbs: return "abs";
    case WeightVariant::kGaussian: return "gaussian";
    case WeightVariant::kMean: return "mean";
  }
  return "?";
}

LossGrad proto_ce_loss(const EmbeddingRef& embedding, int cls, Domain domain,
                       const PrototypeBank& bank) {
  require_embedding(embedding, bank, "proto_ce_loss");
  const int target_col = bank.index_of(cls, domain);
  const int c = bank.num_classes();
  const int first = domain == Domain::kSource ? 0 : c;
  const int count = domain == Domain::kSource ? c : c + 1;

  const auto block = bank.prototypes().middleCols(first, count);
  const Eigen::VectorXd logits = block.transpose() * embedding;
  const double lse = log_sum_exp(logits);
  const int local = target_col - first;

  Eigen::VectorXd coef = (logits.array() - lse).exp().matrix();
  coef(local) -= 1.0;
  return {lse - logits(local), block * coef};
}

LossGrad ppc_loss(const EmbeddingRef& embedding, int cls, const PrototypeBank& bank,
                  double tau) {
  require_embedding(embedding, bank, "ppc_loss");
  if (!(tau > 0.0)) throw ArgumentError("ppc_loss: tau must be > 0");
  const int c = bank.num_classes();
  if (cls < 0 || cls > c) throw LookupError("ppc_loss: class out of range");

  const Eigen::VectorXd logits = (bank.prototypes().transpose() * embedding) / tau;
  const double lse_all = log_sum_exp(logits);

  // Positive columns: both domain prototypes of a known class, or the lone
  // unknown prototype.
  int pos[2];
  int npos = 0;
  if (cls < c) {
    pos[npos++] = cls;
    pos[npos++] = c + cls;
  } else {
    pos[npos++] = 2 * c;
  }
  double m = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < npos; ++k) m = std::max(m, logits(pos[k]));
  double s = 0.0;
  for (int k = 0; k < npos; ++k) s += std::exp(logits(pos[k]) - m);
  const double lse_pos = m + std::log(s);

  Eigen::VectorXd coef = (logits.array() - lse_all).exp().matrix();
  for (int k = 0; k < npos; ++k) coef(pos[k]) -= std::exp(logits(pos[k]) - lse_pos);
  return {lse_all - lse_pos, bank.prototypes() * coef / tau};
}

LossGrad ppd_loss(const EmbeddingRef& embedding, int cls, Domain domain,
                  const PrototypeBank& bank) {
  require_embedding(embedding, bank, "ppd_loss");
  const auto p = bank.column(bank.index_of(cls, domain));
  const double gap = 1.0 - embedding.dot(p);
  return {gap * gap, -2.0 * gap * p};
}

LossGrad proto_loss(const EmbeddingRef& embedding, int cls, Domain domain,
                    const PrototypeBank& bank, const ProtoLossConfig& config) {
  LossGrad ce = proto_ce_loss(embedding, cls, domain, bank);
  if (config.lambda1 == 0.0 && config.lambda2 == 0.0) return ce;
  const LossGrad ppc = ppc_loss(embedding, cls, bank, config.tau);
  const LossGrad ppd = ppd_loss(embedding, cls, domain, bank);
  LossGrad out;
  out.loss = ce.loss + config.lambda1 * ppc.loss + config.lambda2 * ppd.loss;
  out.grad = ce.grad + config.lambda1 * ppc.grad + config.lambda2 * ppd.grad;
  return out;
}

BatchLossGrad proto_loss_batch(const Eigen::MatrixXd& units, std::span<const int> classes,
                               std::span<const Domain> domains, const PrototypeBank& bank,
                               const ProtoLossConfig& config, std::span<const double> scales) {
  const Eigen::Index n = units.cols();
  if (units.rows() != bank.embed_dim()) {
    throw DimensionError("proto_loss_batch: embedding dimension mismatch");
  }
  if (static_cast<Eigen::Index>(classes.size()) != n ||
      static_cast<Eigen::Index>(domains.size()) != n ||
      (!scales.empty() && static_cast<Eigen::Index>(scales.size()) != n)) {
    throw ShapeError("proto_loss_batch: per-pixel inputs differ in length");
  }
  config.validate();
  const int c = bank.num_classes();
  const int k_all = bank.num_prototypes();
  const Eigen::MatrixXd sims = bank.prototypes().transpose() * units;  // K x N
  Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(k_all, n);
  const bool with_ppc = config.lambda1 != 0.0;
  const bool with_ppd = config.lambda2 != 0.0;

  BatchLossGrad out;
  Eigen::VectorXd soft(k_all);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int cls = classes[j];
    const Domain dom = domains[j];
    const int col = bank.index_of(cls, dom);
    const double scale = scales.empty() ? 1.0 : scales[j];
    if (scale == 0.0) continue;
    const auto g = sims.col(j);
    auto kappa = coef.col(j);

    // Same-domain softmax cross-entropy.
    const int first = dom == Domain::kSource ? 0 : c;
    const int count = dom == Domain::kSource ? c : c + 1;
    double m = g.segment(first, count).maxCoeff();
    double z = 0.0;
    for (int k = 0; k < count; ++k) z += std::exp(g(first + k) - m);
    const double lse = m + std::log(z);
    double loss = lse - g(col);
    for (int k = 0; k < count; ++k) kappa(first + k) = std::exp(g(first + k) - lse);
    kappa(col) -= 1.0;

    if (with_ppc) {
      const double inv_tau = 1.0 / config.tau;
      const double m_all = g.maxCoeff() * inv_tau;
      double z_all = 0.0;
      for (int k = 0; k < k_all; ++k) {
        soft(k) = std::exp(g(k) * inv_tau - m_all);
        z_all += soft(k);
      }
      const double lse_all = m_all + std::log(z_all);
      double lse_pos;
      if (cls < c) {
        const double a = g(cls) * inv_tau;
        const double b = g(c + cls) * inv_tau;
        const double mp = std::max(a, b);
        lse_pos = mp + std::log(std::exp(a - mp) + std::exp(b - mp));
        kappa(cls) -= config.lambda1 * inv_tau * std::exp(a - lse_pos);
        kappa(c + cls) -= config.lambda1 * inv_tau * std::exp(b - lse_pos);
      } else {
        lse_pos = g(2 * c) * inv_tau;
        kappa(2 * c) -= config.lambda1 * inv_tau;
      }
      for (int k = 0; k < k_all; ++k) {
        kappa(k) += config.lambda1 * inv_tau * soft(k) / z_all;
      }
      loss += config.lambda1 * (lse_all - lse_pos);
    }
    if (with_ppd) {
      const double gap = 1.0 - g(col);
      loss += config.lambda2 * gap * gap;
      kappa(col) -= config.lambda2 * 2.0 * gap;
    }
    out.loss += scale * loss;
    if (scale != 1.0) kappa *= scale;
  }
  out.grad = bank.prototypes() * coef;
  return out;
}

double weight_scale(double ds, double dt, WeightVariant variant, double sigma) {
  constexpr double kSlack = 1e-9;
  if (!(ds >= -1.0 - kSlack && ds <= 1.0 + kSlack && dt >= -1.0 - kSlack &&
        dt <= 1.0 + kSlack)) {
    throw ArgumentError("weight_scale: similarities must lie in [-1, 1]");
  }
  ds = std::clamp(ds, -1.0, 1.0);
  dt = std::clamp(dt, -1.0, 1.0);
  switch (variant) {
    case WeightVariant::kOurs: {
      const double a = ds + 1.0;
      const double b = dt + 1.0;
      const double denom = a + b;
      return denom == 0.0 ? 0.0 : 2.0 * a * b / denom;
    }
    case WeightVariant::kAbs:
      return 2.0 - std::abs(ds - dt);
    case WeightVariant::kGaussian: {
      if (!(sigma > 0.0)) throw ArgumentError("weight_scale: sigma must be > 0");
      const double diff = ds - dt;
      return 2.0 * std::exp(-diff * diff / (sigma * sigma));
    }
    case WeightVariant::kMean:
      return (ds + 1.0) * (dt + 1.0) / 2.0;
  }
  throw ArgumentError("weight_scale: bad variant");
}

WeightMap weight_map(const EmbeddingMap& embeddings, const LabelMap& classes,
                     const PrototypeBank& bank, WeightVariant variant,
                     double sigma) {
  if (!classes.same_shape(embeddings.height, embeddings.width) ||
      embeddings.data.cols() != static_cast<Eigen::Index>(classes.size())) {
    throw ShapeError("weight_map: embedding and class grids differ in shape");
  }
  if (embeddings.data.rows() != bank.embed_dim()) {
    throw DimensionError("weight_map: embedding dimension mismatch");
  }
  const int unknown = bank.num_classes();
  WeightMap out(classes.height, classes.width, 1.0);
  for (std::size_t j = 0; j < classes.size(); ++j) {
    const int cls = classes[j];
    if (cls == unknown) continue;
    const auto [ds, dt] = cosine_pair(bank, embeddings.data.col(j), cls);
    out[j] = weight_scale(ds, dt, variant, sigma);
  }
  return out;
}

}  // namespace protomatch

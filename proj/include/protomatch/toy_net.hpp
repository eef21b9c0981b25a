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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "protomatch/common.hpp"

namespace protomatch {

struct NetArchitecture {
  int channels = 3;
  int patch_radius = 2;
  std::vector<int> hidden = {64, 64};
  int embed_dim = 0;
  int num_heads = 0;  // C + 1

  int patch_size() const {
    return (2 * patch_radius + 1) * (2 * patch_radius + 1) * channels;
  }
  std::size_t parameter_count() const;
  bool operator==(const NetArchitecture&) const = default;
};

/// Activations kept by forward() for the reverse pass.
struct ForwardCache {
  int height = 0;
  int width = 0;
  Eigen::MatrixXd patches;              // patch_size x N
  std::vector<Eigen::MatrixXd> hidden;  // post-ReLU activations per hidden layer
};

struct NetOutput {
  EmbeddingMap embeddings;  // raw, d x N
  ProbabilityMap probs;     // (C+1) x N
  Eigen::MatrixXd logits;
  ForwardCache cache;
};

/// Per-pixel MLP over a (2r+1)^2 neighbourhood: ReLU hidden layers, a linear
/// embedding layer, and a linear classifier head over C+1 outputs. All
/// parameters live in one flat vector; each layer stores W (out x in,
/// column-major) followed by b.
class PixelNet {
 public:
  PixelNet() = default;
  PixelNet(NetArchitecture arch, std::uint64_t seed, bool zero_head = false);

  const NetArchitecture& arch() const { return arch_; }
  const Eigen::VectorXd& params() const { return params_; }
  void set_params(Eigen::VectorXd p);

  NetOutput forward(const Image& image) const;

  /// Exact reverse pass. `logit_grad` is dL/dlogits ((C+1) x N) and
  /// `embedding_grad` dL/d(raw embedding) (d x N); either may be empty
  /// (size 0) to mean zero.
  Eigen::VectorXd backward(const NetOutput& out, const Eigen::MatrixXd& logit_grad,
                           const Eigen::MatrixXd& embedding_grad) const;

 private:
  struct Layer {
    Eigen::Index offset;  // start of W in params_
    int in;
    int out;
  };
  Eigen::Map<const Eigen::MatrixXd> weight(const Layer& l) const;
  Eigen::Map<const Eigen::VectorXd> bias(const Layer& l) const;
  void build_layout();

  NetArchitecture arch_;
  Eigen::VectorXd params_;
  std::vector<Layer> layers_;  // hidden..., embedding, head
};

/// Builds the patch matrix with zero padding at the borders.
Eigen::MatrixXd extract_patches(const Image& image, int patch_radius);

Eigen::MatrixXd column_softmax(const Eigen::MatrixXd& logits);

/// Column-wise L2 normalization. Throws DegenerateInputError on a zero column.
Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& raw);

/// Chains a gradient taken with respect to the normalized embedding back to the
/// raw embedding: (I - u u^T) g / |e| per column.
Eigen::MatrixXd normalized_to_raw_grad(const Eigen::MatrixXd& raw,
                                       const Eigen::MatrixXd& unit_grad);

/// params - lr * (grads + weight_decay * params). Throws TrainingAbort when a
/// gradient entry is not finite.
Eigen::VectorXd sgd_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                         double lr, double weight_decay);

struct CheckpointHeader {
  NetArchitecture arch;
  int num_classes = 0;
  int embed_dim = 0;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
};

/// One JSON header line, then the parameters as raw little-endian doubles.
void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const Eigen::VectorXd& params);
std::pair<CheckpointHeader, Eigen::VectorXd> load_checkpoint(const std::string& path);

}  // namespace protomatch

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

#include "protomatch/toy_net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "json.hpp"

namespace protomatch {

std::size_t NetArchitecture::parameter_count() const {
  std::size_t total = 0;
  int in = patch_size();
  for (const int h : hidden) {
    total += static_cast<std::size_t>(h) * in + h;
    in = h;
  }
  total += static_cast<std::size_t>(embed_dim) * in + embed_dim;
  total += static_cast<std::size_t>(num_heads) * embed_dim + num_heads;
  return total;
}

PixelNet::PixelNet(NetArchitecture arch, std::uint64_t seed, bool zero_head)
    : arch_(std::move(arch)) {
  if (arch_.channels < 1 || arch_.patch_radius < 0 || arch_.embed_dim < 1 ||
      arch_.num_heads < 2) {
    throw ArgumentError("PixelNet: invalid architecture");
  }
  for (const int h : arch_.hidden) {
    if (h < 1) throw ArgumentError("PixelNet: hidden sizes must be positive");
  }
  build_layout();
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(arch_.parameter_count()));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    const bool is_head = li + 1 == layers_.size();
    if (is_head && zero_head) continue;
    const bool relu_next = li + 2 < layers_.size();
    const double stddev = std::sqrt((relu_next ? 2.0 : 1.0) / l.in);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(l.in) * l.out; ++k) {
      params_(l.offset + k) = stddev * normal(rng);
    }
  }
}

void PixelNet::build_layout() {
  layers_.clear();
  Eigen::Index offset = 0;
  int in = arch_.patch_size();
  auto push = [&](int out) {
    layers_.push_back({offset, in, out});
    offset += static_cast<Eigen::Index>(in) * out + out;
    in = out;
  };
  for (const int h : arch_.hidden) push(h);
  push(arch_.embed_dim);
  push(arch_.num_heads);
}

void PixelNet::set_params(Eigen::VectorXd p) {
  if (p.size() != params_.size()) {
    throw DimensionError("PixelNet::set_params: expected " +
                         std::to_string(params_.size()) + " parameters");
  }
  params_ = std::move(p);
}

Eigen::Map<const Eigen::MatrixXd> PixelNet::weight(const Layer& l) const {
  return {params_.data() + l.offset, l.out, l.in};
}

Eigen::Map<const Eigen::VectorXd> PixelNet::bias(const Layer& l) const {
  return {params_.data() + l.offset + static_cast<Eigen::Index>(l.in) * l.out, l.out};
}

Eigen::MatrixXd extract_patches(const Image& image, int patch_radius) {
  const int side = 2 * patch_radius + 1;
  const int ch = image.channels;
  const int n = image.height * image.width;
  Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(side * side * ch, n);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      double* col = patches.col(y * image.width + x).data();
      for (int dy = -patch_radius; dy <= patch_radius; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= image.height) continue;
        for (int dx = -patch_radius; dx <= patch_radius; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= image.width) continue;
          const int base = ((dy + patch_radius) * side + (dx + patch_radius)) * ch;
          const double* px = &image.data[(static_cast<std::size_t>(yy) * image.width + xx) * ch];
          for (int c = 0; c < ch; ++c) col[base + c] = px[c];
        }
      }
    }
  }
  return patches;
}

Eigen::MatrixXd column_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - m).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

NetOutput PixelNet::forward(const Image& image) const {
  if (image.channels != arch_.channels) {
    throw ShapeError("PixelNet::forward: image has " + std::to_string(image.channels) +
                     " channels, network expects " + std::to_string(arch_.channels));
  }
  NetOutput out;
  out.cache.height = image.height;
  out.cache.width = image.width;
  out.cache.patches = extract_patches(image, arch_.patch_radius);

  const Eigen::MatrixXd* input = &out.cache.patches;
  const std::size_t num_hidden = arch_.hidden.size();
  out.cache.hidden.resize(num_hidden);
  for (std::size_t li = 0; li < num_hidden; ++li) {
    const Layer& l = layers_[li];
    Eigen::MatrixXd z = weight(l) * *input;
    z.colwise() += bias(l);
    out.cache.hidden[li] = z.cwiseMax(0.0);
    input = &out.cache.hidden[li];
  }
  const Layer& emb = layers_[num_hidden];
  const Layer& head = layers_[num_hidden + 1];

  out.embeddings.height = image.height;
  out.embeddings.width = image.width;
  out.embeddings.data = weight(emb) * *input;
  out.embeddings.data.colwise() += bias(emb);

  out.logits = weight(head) * out.embeddings.data;
  out.logits.colwise() += bias(head);
  out.probs.height = image.height;
  out.probs.width = image.width;
  out.probs.data = column_softmax(out.logits);
  return out;
}

Eigen::VectorXd PixelNet::backward(const NetOutput& out, const Eigen::MatrixXd& logit_grad,
                                   const Eigen::MatrixXd& embedding_grad) const {
  const Eigen::Index n = out.embeddings.data.cols();
  const bool has_logit = logit_grad.size() > 0;
  const bool has_embed = embedding_grad.size() > 0;
  if ((has_logit && (logit_grad.rows() != arch_.num_heads || logit_grad.cols() != n)) ||
      (has_embed && (embedding_grad.rows() != arch_.embed_dim || embedding_grad.cols() != n))) {
    throw ShapeError("PixelNet::backward: upstream gradient shape mismatch");
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  auto grad_w = [&](const Layer& l) {
    return Eigen::Map<Eigen::MatrixXd>(grad.data() + l.offset, l.out, l.in);
  };
  auto grad_b = [&](const Layer& l) {
    return Eigen::Map<Eigen::VectorXd>(
        grad.data() + l.offset + static_cast<Eigen::Index>(l.in) * l.out, l.out);
  };

  const std::size_t num_hidden = arch_.hidden.size();
  const Layer& emb = layers_[num_hidden];
  const Layer& head = layers_[num_hidden + 1];

  Eigen::MatrixXd d_embed = has_embed ? embedding_grad
                                      : Eigen::MatrixXd::Zero(arch_.embed_dim, n);
  if (has_logit) {
    grad_w(head).noalias() = logit_grad * out.embeddings.data.transpose();
    grad_b(head) = logit_grad.rowwise().sum();
    d_embed.noalias() += weight(head).transpose() * logit_grad;
  }

  const Eigen::MatrixXd& last = num_hidden > 0 ? out.cache.hidden.back() : out.cache.patches;
  grad_w(emb).noalias() = d_embed * last.transpose();
  grad_b(emb) = d_embed.rowwise().sum();

  if (num_hidden == 0) return grad;
  Eigen::MatrixXd d_act = weight(emb).transpose() * d_embed;
  for (std::size_t li = num_hidden; li-- > 0;) {
    const Layer& l = layers_[li];
    const Eigen::MatrixXd& act = out.cache.hidden[li];
    Eigen::MatrixXd d_pre = (act.array() > 0.0).select(d_act, 0.0);
    const Eigen::MatrixXd& input = li == 0 ? out.cache.patches : out.cache.hidden[li - 1];
    grad_w(l).noalias() = d_pre * input.transpose();
    grad_b(l) = d_pre.rowwise().sum();
    if (li > 0) d_act.noalias() = weight(l).transpose() * d_pre;
  }
  return grad;
}

Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const double norm = raw.col(j).norm();
    if (!(norm > 0.0)) throw DegenerateInputError("normalize_columns: zero embedding");
    out.col(j) = raw.col(j) / norm;
  }
  return out;
}

Eigen::MatrixXd normalized_to_raw_grad(const Eigen::MatrixXd& raw,
                                       const Eigen::MatrixXd& unit_grad) {
  if (raw.rows() != unit_grad.rows() || raw.cols() != unit_grad.cols()) {
    throw ShapeError("normalized_to_raw_grad: shape mismatch");
  }
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const double norm = raw.col(j).norm();
    if (!(norm > 0.0)) throw DegenerateInputError("normalized_to_raw_grad: zero embedding");
    const Eigen::VectorXd u = raw.col(j) / norm;
    const auto g = unit_grad.col(j);
    out.col(j) = (g - u * u.dot(g)) / norm;
  }
  return out;
}

Eigen::VectorXd sgd_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                         double lr, double weight_decay) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: length mismatch");
  if (!(lr >= 0.0)) throw ArgumentError("sgd_step: lr must be >= 0");
  if (!grads.allFinite()) {
    Eigen::Index bad = 0;
    for (; bad < grads.size(); ++bad) {
      if (!std::isfinite(grads(bad))) break;
    }
    throw TrainingAbort("sgd_step: non-finite gradient at parameter " + std::to_string(bad));
  }
  if (lr == 0.0) return params;
  if (weight_decay == 0.0) return params - lr * grads;
  return params - lr * (grads + weight_decay * params);
}

namespace {

nlohmann::json arch_json(const NetArchitecture& a) {
  return {{"channels", a.channels}, {"patch_radius", a.patch_radius},
          {"hidden", a.hidden},     {"embed_dim", a.embed_dim},
          {"num_heads", a.num_heads}};
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const Eigen::VectorXd& params) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  if (static_cast<std::size_t>(params.size()) != header.arch.parameter_count()) {
    throw DimensionError("save_checkpoint: parameter count does not match architecture");
  }
  nlohmann::json j;
  j["arch"] = arch_json(header.arch);
  j["C"] = header.num_classes;
  j["d"] = header.embed_dim;
  j["seed"] = header.seed;
  j["step"] = header.step;
  j["num_params"] = params.size();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump() << "\n";
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
}

std::pair<CheckpointHeader, Eigen::VectorXd> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  CheckpointHeader h;
  const auto& a = j.at("arch");
  h.arch.channels = a.at("channels").get<int>();
  h.arch.patch_radius = a.at("patch_radius").get<int>();
  h.arch.hidden = a.at("hidden").get<std::vector<int>>();
  h.arch.embed_dim = a.at("embed_dim").get<int>();
  h.arch.num_heads = a.at("num_heads").get<int>();
  h.num_classes = j.at("C").get<int>();
  h.embed_dim = j.at("d").get<int>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.step = j.at("step").get<std::int64_t>();
  const auto n = j.at("num_params").get<Eigen::Index>();
  if (static_cast<std::size_t>(n) != h.arch.parameter_count()) {
    throw DimensionError("load_checkpoint: parameter count does not match architecture");
  }
  Eigen::VectorXd params(n);
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("load_checkpoint: truncated parameter block");
  return {h, params};
}

}  // namespace protomatch

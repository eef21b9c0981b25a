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

#include "protomatch/etf_bank.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "json.hpp"

namespace protomatch {

PrototypeBank build_etf(int num_classes, int embed_dim, std::uint64_t seed) {
  if (num_classes < 1) {
    throw ArgumentError("build_etf: num_classes must be >= 1, got " +
                        std::to_string(num_classes));
  }
  const int k = 2 * num_classes + 1;
  if (embed_dim < k) {
    throw DimensionError("build_etf: embed_dim " + std::to_string(embed_dim) +
                         " < 2C+1 = " + std::to_string(k));
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd gaussian(embed_dim, k);
  for (int c = 0; c < k; ++c) {
    for (int r = 0; r < embed_dim; ++r) gaussian(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  const Eigen::MatrixXd basis =
      qr.householderQ() * Eigen::MatrixXd::Identity(embed_dim, k);

  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(k, k) -
      Eigen::MatrixXd::Constant(k, k, 1.0 / static_cast<double>(k));
  const double scale = std::sqrt(static_cast<double>(k) / (k - 1));

  PrototypeBank bank;
  bank.num_classes_ = num_classes;
  bank.embed_dim_ = embed_dim;
  bank.seed_ = seed;
  bank.prototypes_ = scale * basis * centering;
  return bank;
}

int PrototypeBank::index_of(int cls, Domain domain) const {
  if (domain == Domain::kSource) {
    if (cls < 0 || cls >= num_classes_) {
      throw LookupError("prototype_of: no source prototype for class " +
                        std::to_string(cls));
    }
    return cls;
  }
  if (cls < 0 || cls > num_classes_) {
    throw LookupError("prototype_of: no target prototype for class " +
                      std::to_string(cls));
  }
  return num_classes_ + cls;
}

std::string PrototypeBank::to_json() const {
  nlohmann::json j;
  j["num_classes"] = num_classes_;
  j["embed_dim"] = embed_dim_;
  j["seed"] = seed_;
  // Row-major: one row per prototype.
  nlohmann::json rows = nlohmann::json::array();
  for (int k = 0; k < num_prototypes(); ++k) {
    std::vector<double> row(prototypes_.col(k).data(),
                            prototypes_.col(k).data() + embed_dim_);
    rows.push_back(row);
  }
  j["prototypes"] = rows;
  return j.dump();
}

PrototypeBank PrototypeBank::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  PrototypeBank bank;
  bank.num_classes_ = j.at("num_classes").get<int>();
  bank.embed_dim_ = j.at("embed_dim").get<int>();
  bank.seed_ = j.at("seed").get<std::uint64_t>();
  const auto& rows = j.at("prototypes");
  if (static_cast<int>(rows.size()) != bank.num_prototypes()) {
    throw DimensionError("PrototypeBank::from_json: expected " +
                         std::to_string(bank.num_prototypes()) + " prototypes");
  }
  bank.prototypes_.resize(bank.embed_dim_, bank.num_prototypes());
  for (int k = 0; k < bank.num_prototypes(); ++k) {
    const auto row = rows[k].get<std::vector<double>>();
    if (static_cast<int>(row.size()) != bank.embed_dim_) {
      throw DimensionError("PrototypeBank::from_json: bad prototype width");
    }
    for (int r = 0; r < bank.embed_dim_; ++r) bank.prototypes_(r, k) = row[r];
  }
  return bank;
}

std::pair<double, double> cosine_pair(
    const PrototypeBank& bank, const Eigen::Ref<const Eigen::VectorXd>& embedding,
    int cls) {
  if (embedding.size() != bank.embed_dim()) {
    throw DimensionError("cosine_pair: embedding has dimension " +
                         std::to_string(embedding.size()));
  }
  if (cls < 0 || cls >= bank.num_classes()) {
    throw LookupError("cosine_pair: class out of range");
  }
  const double norm = embedding.norm();
  if (!(norm > 0.0)) {
    throw DegenerateInputError("cosine_pair: zero-norm embedding");
  }
  const double ds = bank.column(cls).dot(embedding) / norm;
  const double dt = bank.column(bank.num_classes() + cls).dot(embedding) / norm;
  return {std::clamp(ds, -1.0, 1.0), std::clamp(dt, -1.0, 1.0)};
}

}  // namespace protomatch

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
#include <utility>

#include <Eigen/Dense>

#include "protomatch/common.hpp"

namespace protomatch {

/// Fixed simplex equiangular tight frame of K = 2C+1 unit prototypes.
///
/// Column layout: 0..C-1 are the source prototypes of classes 0..C-1,
/// C..2C-1 the target prototypes, and 2C the target-side unknown prototype.
/// Every pair of distinct columns has inner product -1/(2C).
class PrototypeBank {
 public:
  int num_classes() const { return num_classes_; }
  int embed_dim() const { return embed_dim_; }
  int num_prototypes() const { return 2 * num_classes_ + 1; }
  std::uint64_t seed() const { return seed_; }

  /// d x K matrix, one prototype per column.
  const Eigen::MatrixXd& prototypes() const { return prototypes_; }

  /// Column index of the prototype for (cls, domain). cls == C is the
  /// unknown class and only exists on the target side.
  int index_of(int cls, Domain domain) const;

  Eigen::VectorXd prototype_of(int cls, Domain domain) const {
    return prototypes_.col(index_of(cls, domain));
  }

  auto column(int k) const { return prototypes_.col(k); }

  Eigen::MatrixXd gram() const {
    return prototypes_.transpose() * prototypes_;
  }

  std::string to_json() const;
  static PrototypeBank from_json(const std::string& text);

  bool operator==(const PrototypeBank& o) const {
    return num_classes_ == o.num_classes_ && embed_dim_ == o.embed_dim_ &&
           seed_ == o.seed_ && prototypes_ == o.prototypes_;
  }

 private:
  friend PrototypeBank build_etf(int, int, std::uint64_t);

  int num_classes_ = 0;
  int embed_dim_ = 0;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd prototypes_;
};

/// Builds the frame sqrt(K/(K-1)) * U * (I - 11^T/K), where U (d x K) has
/// orthonormal columns obtained from a QR factorization of a Gaussian matrix
/// drawn from `seed`.
///
/// Throws ArgumentError when num_classes < 1 and DimensionError when
/// embed_dim < 2*num_classes + 1.
PrototypeBank build_etf(int num_classes, int embed_dim, std::uint64_t seed);

/// Cosine similarities (d_s, d_t) of `embedding` against the source and
/// target prototypes of `cls`. Throws DegenerateInputError on a zero vector.
std::pair<double, double> cosine_pair(const PrototypeBank& bank,
                                      const Eigen::Ref<const Eigen::VectorXd>& embedding,
                                      int cls);

}  // namespace protomatch

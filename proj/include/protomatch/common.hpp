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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace protomatch {

// Class indices are zero-based throughout the library. For a model with C
// known (source) classes, heads 0..C-1 are the known classes and head C is
// the unknown class.

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class DegenerateInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrainingAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Domain { kSource, kTarget };

inline const char* to_string(Domain d) {
  return d == Domain::kSource ? "source" : "target";
}

// Row-major H x W grid of scalars.
template <typename T>
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(int h, int w, T fill = T{})
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const { return values.size(); }
  T& operator[](std::size_t i) { return values[i]; }
  const T& operator[](std::size_t i) const { return values[i]; }
  T& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int y, int x) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  bool same_shape(int h, int w) const { return height == h && width == w; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const {
    return height == o.height && width == o.width;
  }
  bool operator==(const Grid&) const = default;
};

using LabelMap = Grid<int>;
using WeightMap = Grid<double>;

// Per-pixel vectors stored column-wise: column j is pixel j (row-major pixel
// order), rows are channels.
struct PixelMatrix {
  int height = 0;
  int width = 0;
  Eigen::MatrixXd data;

  int pixels() const { return height * width; }
  int channels() const { return static_cast<int>(data.rows()); }
};

// Raw (unnormalized) pixel embeddings, d x (H*W).
struct EmbeddingMap : PixelMatrix {};

// Softmax outputs over C+1 heads, (C+1) x (H*W).
struct ProbabilityMap : PixelMatrix {};

// H x W x channels image, interleaved channels, values nominally in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, 0.0) {}

  double& at(int y, int x, int ch) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
  double at(int y, int x, int ch) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
  bool operator==(const Image&) const = default;
};

}  // namespace protomatch

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
#include <random>
#include <span>
#include <string>
#include <vector>

#include "protomatch/common.hpp"
#include "protomatch/pseudo_labels.hpp"

namespace protomatch {

/// Pixel-count statistics of one label map. `counts` has C+1 slots (the last
/// is the unknown class); `freq` and `rarity` cover the C known classes only.
struct ClassDistribution {
  std::vector<std::int64_t> counts;
  std::vector<double> freq;
  std::vector<double> rarity;
  double temperature = 0.0;

  int num_classes() const { return static_cast<int>(freq.size()); }
};

/// Counts pixels of each class and f_c = n_c / sum_k n_k over known classes.
/// Unknown pixels (index num_classes) are counted but excluded from f.
/// Throws ArgumentError when no known-class pixel exists.
ClassDistribution class_frequency(const LabelMap& labels, int num_classes);

/// softmax((1 - f_c) / T) over every slot of `freq`.
std::vector<double> rarity_weights(std::span<const double> freq, double temperature);

/// Known classes with nonzero count in both vectors.
std::vector<int> overlap_classes(std::span<const std::int64_t> source_counts,
                                 std::span<const std::int64_t> target_counts);

/// sum over c in overlap of n_c^s * rarity_c.
double match_score(std::span<const std::int64_t> source_counts,
                   std::span<const double> rarity, std::span<const int> overlap);

/// Precomputed per-image class counts of the labelled source set.
class SourceIndex {
 public:
  struct Entry {
    std::uint32_t id = 0;
    std::vector<std::int64_t> counts;  // C known classes
  };

  explicit SourceIndex(int num_classes) : num_classes_(num_classes) {}

  static SourceIndex build(std::span<const LabelMap> labels, int num_classes);

  void add(std::uint32_t id, std::vector<std::int64_t> counts);

  int num_classes() const { return num_classes_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t position_of(std::uint32_t id) const;

  /// JSON object {"<id>": [n_1, ..., n_C], ...}.
  std::string to_json() const;
  static SourceIndex from_json(const std::string& text);

 private:
  int num_classes_;
  std::vector<Entry> entries_;
};

struct MatchCandidate {
  std::uint32_t id = 0;
  double score = 0.0;
};

/// Match scores of every indexed image against one target pseudo-label,
/// sorted by descending score then ascending id.
std::vector<MatchCandidate> rank_sources(const SourceIndex& index,
                                         const LabelMap& target_pseudo,
                                         double temperature);

/// Id of the highest-scoring source image; ties go to the lowest id.
/// Throws ArgumentError on an empty index.
std::uint32_t select_source(const SourceIndex& index, const PseudoLabelMap& target_pseudo,
                            double temperature);

/// Uniform draw among the top_k highest-scoring images.
std::uint32_t select_source_top_k(const SourceIndex& index,
                                  const PseudoLabelMap& target_pseudo,
                                  double temperature, int top_k, std::mt19937_64& rng);

/// Rare-class sampling over target images driven by pseudo-label counts.
///
/// The class distribution is taken once per refresh() from the aggregate
/// counts; sample() draws a class from the rarity weights of the classes
/// present in the aggregate, then an image containing that class uniformly.
/// After a bounded number of failed class draws it falls back to a uniform
/// image.
class TargetRareClassSampler {
 public:
  TargetRareClassSampler(int num_images, int num_classes, double temperature,
                         std::uint64_t seed);

  void set_counts(int image, std::vector<std::int64_t> counts);
  const std::vector<std::int64_t>& counts(int image) const { return counts_.at(image); }

  /// Recomputes the class distribution from the current per-image counts.
  void refresh();

  int sample();

  const std::vector<double>& class_probabilities() const { return class_probs_; }
  int num_images() const { return static_cast<int>(counts_.size()); }

  static constexpr int kMaxClassRetries = 16;

 private:
  int num_classes_;
  double temperature_;
  std::mt19937_64 rng_;
  std::vector<std::vector<std::int64_t>> counts_;  // per image, C slots
  std::vector<double> class_probs_;
  std::vector<std::vector<int>> images_with_class_;
};

}  // namespace protomatch

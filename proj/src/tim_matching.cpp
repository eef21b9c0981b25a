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

#include "protomatch/tim_matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace protomatch {

ClassDistribution class_frequency(const LabelMap& labels, int num_classes) {
  if (num_classes < 1) throw ArgumentError("class_frequency: num_classes must be >= 1");
  ClassDistribution dist;
  dist.counts.assign(static_cast<std::size_t>(num_classes) + 1, 0);
  for (const int cls : labels.values) {
    if (cls < 0 || cls > num_classes) {
      throw LookupError("class_frequency: label " + std::to_string(cls) + " out of range");
    }
    ++dist.counts[static_cast<std::size_t>(cls)];
  }
  std::int64_t total = 0;
  for (int c = 0; c < num_classes; ++c) total += dist.counts[c];
  if (total == 0) throw ArgumentError("class_frequency: no known-class pixels");
  dist.freq.resize(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    dist.freq[c] = static_cast<double>(dist.counts[c]) / static_cast<double>(total);
  }
  return dist;
}

std::vector<double> rarity_weights(std::span<const double> freq, double temperature) {
  if (!(temperature > 0.0)) throw ArgumentError("rarity_weights: T must be > 0");
  if (freq.empty()) throw ArgumentError("rarity_weights: empty frequency vector");
  std::vector<double> logits(freq.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < freq.size(); ++c) {
    if (!(freq[c] >= 0.0 && freq[c] <= 1.0)) {
      throw ArgumentError("rarity_weights: frequencies must lie in [0, 1]");
    }
    logits[c] = (1.0 - freq[c]) / temperature;
    m = std::max(m, logits[c]);
  }
  double z = 0.0;
  for (double& v : logits) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : logits) v /= z;
  return logits;
}

std::vector<int> overlap_classes(std::span<const std::int64_t> source_counts,
                                 std::span<const std::int64_t> target_counts) {
  const std::size_t n = std::min(source_counts.size(), target_counts.size());
  std::vector<int> out;
  for (std::size_t c = 0; c < n; ++c) {
    if (source_counts[c] > 0 && target_counts[c] > 0) out.push_back(static_cast<int>(c));
  }
  return out;
}

double match_score(std::span<const std::int64_t> source_counts,
                   std::span<const double> rarity, std::span<const int> overlap) {
  double score = 0.0;
  for (const int c : overlap) {
    if (c < 0 || static_cast<std::size_t>(c) >= source_counts.size() ||
        static_cast<std::size_t>(c) >= rarity.size()) {
      throw LookupError("match_score: class index out of range");
    }
    score += static_cast<double>(source_counts[c]) * rarity[c];
  }
  return score;
}

SourceIndex SourceIndex::build(std::span<const LabelMap> labels, int num_classes) {
  SourceIndex index(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (const int cls : labels[i].values) {
      if (cls < 0 || cls >= num_classes) {
        throw LookupError("SourceIndex: source label out of range");
      }
      ++counts[cls];
    }
    index.add(static_cast<std::uint32_t>(i), std::move(counts));
  }
  return index;
}

void SourceIndex::add(std::uint32_t id, std::vector<std::int64_t> counts) {
  if (static_cast<int>(counts.size()) != num_classes_) {
    throw DimensionError("SourceIndex::add: count vector has wrong length");
  }
  for (const auto n : counts) {
    if (n < 0) throw ArgumentError("SourceIndex::add: negative count");
  }
  for (const auto& e : entries_) {
    if (e.id == id) throw ArgumentError("SourceIndex::add: duplicate image id");
  }
  entries_.push_back({id, std::move(counts)});
}

std::size_t SourceIndex::position_of(std::uint32_t id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].id == id) return i;
  }
  throw LookupError("SourceIndex: unknown image id " + std::to_string(id));
}

std::string SourceIndex::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& e : entries_) j[std::to_string(e.id)] = e.counts;
  return j.dump();
}

SourceIndex SourceIndex::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object() || j.empty()) throw ArgumentError("SourceIndex::from_json: empty index");
  std::vector<std::pair<std::uint32_t, std::vector<std::int64_t>>> rows;
  for (const auto& [key, value] : j.items()) {
    rows.emplace_back(static_cast<std::uint32_t>(std::stoul(key)),
                      value.get<std::vector<std::int64_t>>());
  }
  std::sort(rows.begin(), rows.end());
  SourceIndex index(static_cast<int>(rows.front().second.size()));
  for (auto& [id, counts] : rows) index.add(id, std::move(counts));
  return index;
}

std::vector<MatchCandidate> rank_sources(const SourceIndex& index,
                                         const LabelMap& target_pseudo,
                                         double temperature) {
  const int c = index.num_classes();
  std::vector<std::int64_t> target_counts(static_cast<std::size_t>(c), 0);
  std::int64_t total = 0;
  for (const int cls : target_pseudo.values) {
    if (cls < 0 || cls > c) throw LookupError("rank_sources: pseudo-label out of range");
    if (cls < c) {
      ++target_counts[cls];
      ++total;
    }
  }
  std::vector<double> freq(static_cast<std::size_t>(c), 0.0);
  if (total > 0) {
    for (int k = 0; k < c; ++k) freq[k] = static_cast<double>(target_counts[k]) / total;
  }
  const auto rarity = rarity_weights(freq, temperature);

  std::vector<MatchCandidate> out;
  out.reserve(index.size());
  for (const auto& e : index.entries()) {
    const auto overlap = overlap_classes(e.counts, target_counts);
    out.push_back({e.id, match_score(e.counts, rarity, overlap)});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return out;
}

std::uint32_t select_source(const SourceIndex& index, const PseudoLabelMap& target_pseudo,
                            double temperature) {
  if (index.empty()) throw ArgumentError("select_source: empty source index");
  return rank_sources(index, target_pseudo.classes, temperature).front().id;
}

std::uint32_t select_source_top_k(const SourceIndex& index,
                                  const PseudoLabelMap& target_pseudo,
                                  double temperature, int top_k, std::mt19937_64& rng) {
  if (index.empty()) throw ArgumentError("select_source_top_k: empty source index");
  if (top_k < 1) throw ArgumentError("select_source_top_k: top_k must be >= 1");
  const auto ranked = rank_sources(index, target_pseudo.classes, temperature);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(top_k), ranked.size());
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  return ranked[pick(rng)].id;
}

TargetRareClassSampler::TargetRareClassSampler(int num_images, int num_classes,
                                               double temperature, std::uint64_t seed)
    : num_classes_(num_classes), temperature_(temperature), rng_(seed) {
  if (num_images < 1) throw ArgumentError("TargetRareClassSampler: empty target index");
  if (!(temperature > 0.0)) throw ArgumentError("TargetRareClassSampler: T must be > 0");
  counts_.assign(static_cast<std::size_t>(num_images),
                 std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
  refresh();
}

void TargetRareClassSampler::set_counts(int image, std::vector<std::int64_t> counts) {
  if (static_cast<int>(counts.size()) != num_classes_) {
    throw DimensionError("TargetRareClassSampler::set_counts: wrong length");
  }
  counts_.at(static_cast<std::size_t>(image)) = std::move(counts);
}

void TargetRareClassSampler::refresh() {
  std::vector<std::int64_t> total(static_cast<std::size_t>(num_classes_), 0);
  images_with_class_.assign(static_cast<std::size_t>(num_classes_), {});
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    for (int c = 0; c < num_classes_; ++c) {
      total[c] += counts_[i][c];
      if (counts_[i][c] > 0) images_with_class_[c].push_back(static_cast<int>(i));
    }
  }
  std::int64_t sum = 0;
  for (const auto n : total) sum += n;
  class_probs_.assign(static_cast<std::size_t>(num_classes_), 0.0);
  if (sum == 0) return;

  std::vector<int> present;
  std::vector<double> freq;
  for (int c = 0; c < num_classes_; ++c) {
    if (total[c] > 0) {
      present.push_back(c);
      freq.push_back(static_cast<double>(total[c]) / static_cast<double>(sum));
    }
  }
  const auto w = rarity_weights(freq, temperature_);
  for (std::size_t k = 0; k < present.size(); ++k) class_probs_[present[k]] = w[k];
}

int TargetRareClassSampler::sample() {
  const int n = num_images();
  if (n == 1) return 0;
  double mass = 0.0;
  for (const double p : class_probs_) mass += p;
  if (mass > 0.0) {
    std::discrete_distribution<int> pick_class(class_probs_.begin(), class_probs_.end());
    for (int attempt = 0; attempt < kMaxClassRetries; ++attempt) {
      const auto& candidates = images_with_class_[pick_class(rng_)];
      if (candidates.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      return candidates[pick(rng_)];
    }
  }
  std::uniform_int_distribution<int> uniform(0, n - 1);
  return uniform(rng_);
}

}  // namespace protomatch

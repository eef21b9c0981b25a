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

#include "protomatch/synth_bench.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "protomatch/image_io.hpp"

namespace protomatch {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t image_seed(std::uint64_t seed, Domain domain, int index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(index) * 2 +
                                                  (domain == Domain::kTarget ? 1 : 0)));
}

std::vector<int> non_background(const ScenarioConfig& c) {
  std::vector<int> all;
  for (std::size_t k = 1; k < c.common_classes.size(); ++k) all.push_back(c.common_classes[k]);
  all.insert(all.end(), c.source_private.begin(), c.source_private.end());
  all.insert(all.end(), c.target_private.begin(), c.target_private.end());
  return all;
}

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  h = h - std::floor(h);
  const double hh = h * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
    default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
  }
}

struct Blob {
  int cls;
  bool ellipse;
  double cy, cx, ry, rx, angle;
};

bool inside(const Blob& b, double y, double x) {
  const double dy = y - b.cy;
  const double dx = x - b.cx;
  const double ca = std::cos(b.angle);
  const double sa = std::sin(b.angle);
  const double u = (dx * ca + dy * sa) / b.rx;
  const double v = (-dx * sa + dy * ca) / b.ry;
  return b.ellipse ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
}

Blob random_blob(int cls, const ScenarioConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scale = std::min(c.height, c.width) / 64.0;
  Blob b;
  b.cls = cls;
  b.ellipse = unit(rng) < 0.5;
  b.cy = unit(rng) * c.height;
  b.cx = unit(rng) * c.width;
  b.ry = (5.0 + 9.0 * unit(rng)) * scale;
  b.rx = (5.0 + 9.0 * unit(rng)) * scale;
  b.angle = unit(rng) * std::numbers::pi;
  return b;
}

void paint(const Blob& b, LabelMap& labels) {
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) {
      if (inside(b, y + 0.5, x + 0.5)) labels.at(y, x) = b.cls;
    }
  }
}

}  // namespace

std::vector<int> ScenarioConfig::source_classes() const {
  std::vector<int> out = common_classes;
  out.insert(out.end(), source_private.begin(), source_private.end());
  return out;
}

std::vector<int> ScenarioConfig::target_classes() const {
  std::vector<int> out = common_classes;
  out.insert(out.end(), target_private.begin(), target_private.end());
  return out;
}

int ScenarioConfig::head_of(int global_class) const {
  const auto src = source_classes();
  const auto it = std::find(src.begin(), src.end(), global_class);
  return it == src.end() ? -1 : static_cast<int>(it - src.begin());
}

double ScenarioConfig::occurrence_probability(int global_class, Domain domain) const {
  const auto members = domain == Domain::kSource ? source_classes() : target_classes();
  if (std::find(members.begin(), members.end(), global_class) == members.end()) return 0.0;
  if (global_class == common_classes.front()) return 1.0;
  auto order = popularity;
  if (order.empty()) {
    order = non_background(*this);
    std::sort(order.begin(), order.end());
  }
  const auto it = std::find(order.begin(), order.end(), global_class);
  const auto rank = it == order.end() ? static_cast<long>(order.size())
                                      : static_cast<long>(it - order.begin());
  return max_occurrence * std::pow(long_tail_decay, static_cast<double>(rank));
}

void ScenarioConfig::validate() const {
  if (common_classes.empty()) throw ArgumentError("ScenarioConfig: no common classes");
  if (images_per_domain < 1) throw ArgumentError("ScenarioConfig: images_per_domain must be >= 1");
  if (height < 4 || width < 4) throw ArgumentError("ScenarioConfig: image too small");
  std::set<int> seen;
  for (const auto* list : {&common_classes, &source_private, &target_private}) {
    for (const int c : *list) {
      if (c < 0 || c > 254) throw ArgumentError("ScenarioConfig: class ids must lie in 0..254");
      if (!seen.insert(c).second) {
        throw ArgumentError("ScenarioConfig: class " + std::to_string(c) +
                            " appears in more than one list");
      }
    }
  }
  if (!(long_tail_decay > 0.0 && long_tail_decay <= 1.0) ||
      !(max_occurrence > 0.0 && max_occurrence <= 1.0)) {
    throw ArgumentError("ScenarioConfig: occurrence profile out of range");
  }
  if (shift.noise_std < 0.0 || base_noise_std < 0.0) {
    throw ArgumentError("ScenarioConfig: negative noise");
  }
}

ScenarioConfig scenario_presets(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.common_classes = {0, 1, 2, 3, 4, 5};
  c.shift = {0.04, 0.04, 0.3};
  c.long_tail_decay = 0.7;
  c.popularity = {1, 8, 6, 2, 3, 7, 4, 5};
  if (name == "closed") {
  } else if (name == "partial") {
    c.source_private = {6, 7};
  } else if (name == "open") {
    c.target_private = {8};
  } else if (name == "open_partial") {
    c.source_private = {6, 7};
    c.target_private = {8};
  } else {
    throw ArgumentError("unknown scenario preset '" + name + "'");
  }
  return c;
}

ClassAppearance class_appearance(int k, Domain domain, const DomainShift& shift) {
  ClassAppearance a;
  a.hue = std::fmod(k * 0.3819660112501051, 1.0);
  a.saturation = 0.55 + 0.15 * (k % 2);
  a.value = 0.5 + 0.07 * ((k / 2) % 3);
  a.texture = k % 3;
  a.frequency = 0.18 + 0.04 * ((k / 3) % 3);
  a.orientation = (k % 4) * std::numbers::pi / 4.0;
  if (domain == Domain::kTarget) {
    a.hue += shift.hue_shift * (k % 2 == 0 ? 1.0 : -1.0);
    a.frequency *= 1.0 + shift.texture_freq;
  }
  a.hue -= std::floor(a.hue);
  return a;
}

SegSample render_image(const ScenarioConfig& config, Domain domain, int index) {
  std::mt19937_64 rng(image_seed(config.seed, domain, index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto classes = domain == Domain::kSource ? config.source_classes()
                                                 : config.target_classes();
  const int background = config.common_classes.front();

  SegSample s;
  s.labels = LabelMap(config.height, config.width, background);

  std::vector<Blob> blobs;
  std::vector<int> requested;
  for (const int cls : classes) {
    if (cls == background) continue;
    if (unit(rng) < config.occurrence_probability(cls, domain)) {
      requested.push_back(cls);
      const int n = unit(rng) < 0.3 ? 2 : 1;
      for (int k = 0; k < n; ++k) blobs.push_back(random_blob(cls, config, rng));
    }
  }
  std::shuffle(blobs.begin(), blobs.end(), rng);
  for (const auto& b : blobs) paint(b, s.labels);
  // A requested class that got fully occluded is drawn again on top.
  for (const int cls : requested) {
    if (std::find(s.labels.values.begin(), s.labels.values.end(), cls) == s.labels.values.end()) {
      const auto it = std::find_if(blobs.begin(), blobs.end(),
                                   [cls](const Blob& b) { return b.cls == cls; });
      paint(*it, s.labels);
      if (std::find(s.labels.values.begin(), s.labels.values.end(), cls) ==
          s.labels.values.end()) {
        s.labels.at(static_cast<int>(std::clamp(it->cy, 0.0, config.height - 1.0)),
                    static_cast<int>(std::clamp(it->cx, 0.0, config.width - 1.0))) = cls;
      }
    }
  }

  // Per-image texture phases, one per class.
  std::vector<double> phase(256);
  for (double& p : phase) p = unit(rng) * 2.0 * std::numbers::pi;
  std::vector<ClassAppearance> look(256);
  std::vector<std::array<double, 3>> rgb(256);
  for (const int cls : classes) {
    look[cls] = class_appearance(cls, domain, config.shift);
    double c3[3];
    hsv_to_rgb(look[cls].hue, look[cls].saturation, 1.0, c3);
    rgb[cls] = {c3[0], c3[1], c3[2]};
  }

  const double noise = config.base_noise_std +
                       (domain == Domain::kTarget ? config.shift.noise_std : 0.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  s.image = Image(config.height, config.width, 3);
  for (int y = 0; y < config.height; ++y) {
    for (int x = 0; x < config.width; ++x) {
      const int cls = s.labels.at(y, x);
      const auto& a = look[cls];
      const double two_pi_f = 2.0 * std::numbers::pi * a.frequency;
      const double u = x * std::cos(a.orientation) + y * std::sin(a.orientation);
      const double v = -x * std::sin(a.orientation) + y * std::cos(a.orientation);
      double mod = 0.0;
      if (a.texture == 1) {
        mod = std::sin(two_pi_f * u + phase[cls]) >= 0.0 ? 1.0 : -1.0;
      } else if (a.texture == 2) {
        mod = std::sin(two_pi_f * u + phase[cls]) * std::sin(two_pi_f * v + phase[cls]) >= 0.0
                  ? 1.0
                  : -1.0;
      }
      const double value = a.value * (1.0 + 0.35 * mod);
      for (int ch = 0; ch < 3; ++ch) {
        const double px = value * rgb[cls][ch] + (noise > 0.0 ? noise * gauss(rng) : 0.0);
        s.image.at(y, x, ch) = std::clamp(px, 0.0, 1.0);
      }
    }
  }
  return s;
}

DomainPair generate_domain_pair(const ScenarioConfig& config) {
  config.validate();
  DomainPair pair;
  pair.scenario = config;
  std::vector<SegSample> source;
  std::vector<Image> target;
  std::vector<LabelMap> truth;
  source.reserve(static_cast<std::size_t>(config.images_per_domain));
  for (int i = 0; i < config.images_per_domain; ++i) {
    SegSample s = render_image(config, Domain::kSource, i);
    for (int& v : s.labels.values) v = config.head_of(v);
    source.push_back(std::move(s));
  }
  for (int i = 0; i < config.images_per_domain; ++i) {
    SegSample t = render_image(config, Domain::kTarget, i);
    target.push_back(std::move(t.image));
    truth.push_back(std::move(t.labels));
  }
  pair.source = SourceDataset(std::move(source));
  pair.target = TargetDataset(std::move(target));
  pair.target_truth = TargetGroundTruth(std::move(truth));
  return pair;
}

std::string scenario_to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["scenario"] = c.name;
  j["common_classes"] = c.common_classes;
  j["source_private"] = c.source_private;
  j["target_private"] = c.target_private;
  j["height"] = c.height;
  j["width"] = c.width;
  j["images_per_domain"] = c.images_per_domain;
  j["domain_shift"] = {{"hue_shift", c.shift.hue_shift},
                       {"noise_std", c.shift.noise_std},
                       {"texture_freq", c.shift.texture_freq}};
  j["seed"] = c.seed;
  j["long_tail_decay"] = c.long_tail_decay;
  j["max_occurrence"] = c.max_occurrence;
  j["base_noise_std"] = c.base_noise_std;
  j["popularity"] = c.popularity;
  return j.dump(2);
}

ScenarioConfig scenario_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ScenarioConfig c;
  c.name = j.value("scenario", std::string("custom"));
  c.common_classes = j.at("common_classes").get<std::vector<int>>();
  c.source_private = j.value("source_private", std::vector<int>{});
  c.target_private = j.value("target_private", std::vector<int>{});
  c.height = j.value("height", 64);
  c.width = j.value("width", 64);
  c.images_per_domain = j.value("images_per_domain", 200);
  if (j.contains("domain_shift")) {
    const auto& d = j["domain_shift"];
    c.shift.hue_shift = d.value("hue_shift", 0.0);
    c.shift.noise_std = d.value("noise_std", 0.0);
    c.shift.texture_freq = d.value("texture_freq", 0.0);
  }
  c.seed = j.value("seed", std::uint64_t{0});
  c.long_tail_decay = j.value("long_tail_decay", 0.5);
  c.max_occurrence = j.value("max_occurrence", 0.9);
  c.base_noise_std = j.value("base_noise_std", 0.02);
  c.popularity = j.value("popularity", std::vector<int>{});
  c.validate();
  return c;
}

void write_domain_pair(const DomainPair& pair, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root / "source");
  fs::create_directories(root / "target");
  fs::create_directories(root / "target_gt");
  std::ofstream(root / "manifest.json") << scenario_to_json(pair.scenario) << "\n";
  char name[32];
  for (std::size_t i = 0; i < pair.source.size(); ++i) {
    std::snprintf(name, sizeof(name), "%04zu", i);
    write_ppm((root / "source" / ("img_" + std::string(name) + ".ppm")).string(),
              pair.source[i].image);
    write_label_pgm((root / "source" / ("lbl_" + std::string(name) + ".pgm")).string(),
                    pair.source[i].labels);
  }
  for (std::size_t i = 0; i < pair.target.size(); ++i) {
    std::snprintf(name, sizeof(name), "%04zu", i);
    write_ppm((root / "target" / ("img_" + std::string(name) + ".ppm")).string(),
              pair.target.image(i));
    write_label_pgm((root / "target_gt" / ("lbl_" + std::string(name) + ".pgm")).string(),
                    pair.target_truth.labels(i));
  }
}

DomainPair read_domain_pair(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::ifstream manifest(root / "manifest.json");
  if (!manifest) throw std::runtime_error("missing manifest.json in " + dir);
  std::stringstream ss;
  ss << manifest.rdbuf();
  DomainPair pair;
  pair.scenario = scenario_from_json(ss.str());
  std::vector<SegSample> source;
  std::vector<Image> target;
  std::vector<LabelMap> truth;
  char name[32];
  for (int i = 0; i < pair.scenario.images_per_domain; ++i) {
    std::snprintf(name, sizeof(name), "%04d", i);
    SegSample s;
    s.image = read_ppm((root / "source" / ("img_" + std::string(name) + ".ppm")).string());
    s.labels = read_label_pgm((root / "source" / ("lbl_" + std::string(name) + ".pgm")).string());
    source.push_back(std::move(s));
    target.push_back(read_ppm((root / "target" / ("img_" + std::string(name) + ".ppm")).string()));
    truth.push_back(
        read_label_pgm((root / "target_gt" / ("lbl_" + std::string(name) + ".pgm")).string()));
  }
  pair.source = SourceDataset(std::move(source));
  pair.target = TargetDataset(std::move(target));
  pair.target_truth = TargetGroundTruth(std::move(truth));
  return pair;
}

MixedSample class_mix(const SegSample& source, const Image& target_image,
                      const PseudoLabelMap& target_pseudo, const std::vector<int>& selected) {
  if (!source.labels.same_shape(target_pseudo.classes) ||
      source.image.height != target_image.height || source.image.width != target_image.width ||
      source.image.channels != target_image.channels) {
    throw ShapeError("class_mix: source and target samples differ in size");
  }
  MixedSample m;
  m.image = target_image;
  m.labels = target_pseudo;
  m.pasted = Grid<std::uint8_t>(source.labels.height, source.labels.width, 0);
  if (selected.empty()) return m;
  const std::set<int> chosen(selected.begin(), selected.end());
  const int ch = target_image.channels;
  for (std::size_t j = 0; j < source.labels.size(); ++j) {
    if (!chosen.contains(source.labels[j])) continue;
    m.pasted[j] = 1;
    m.labels.classes[j] = source.labels[j];
    m.labels.weights[j] = 1.0;
    m.labels.confidence[j] = 1.0;
    for (int c = 0; c < ch; ++c) m.image.data[j * ch + c] = source.image.data[j * ch + c];
  }
  return m;
}

MixedSample class_mix(const SegSample& source, const Image& target_image,
                      const PseudoLabelMap& target_pseudo, std::mt19937_64& rng) {
  std::set<int> present(source.labels.values.begin(), source.labels.values.end());
  std::vector<int> classes(present.begin(), present.end());
  std::shuffle(classes.begin(), classes.end(), rng);
  classes.resize((classes.size() + 1) / 2);
  return class_mix(source, target_image, target_pseudo, classes);
}

}  // namespace protomatch

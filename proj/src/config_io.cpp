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

#include "protomatch/config_io.hpp"

#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace protomatch {
namespace {

namespace pt = boost::property_tree;

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    std::size_t used = 0;
    const int v = std::stoi(item.substr(b), &used);
    if (item.find_first_not_of(" \t", b + used) != std::string::npos) {
      throw ArgumentError("bad integer list '" + text + "'");
    }
    out.push_back(v);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  return out.str();
}

// Visits every key of a section and rejects the ones nobody consumed.
class Section {
 public:
  Section(const pt::ptree& root, const std::string& name) : name_(name) {
    if (auto child = root.get_child_optional(name)) tree_ = *child;
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : tree_) {
      if (!seen_.count(key)) throw ArgumentError("unknown config key [" + name_ + "] " + key);
    }
  }

  template <typename T>
  void read(const std::string& key, T& value) {
    seen_.insert(key);
    if (auto v = tree_.get_optional<std::string>(key)) {
      try {
        value = tree_.get<T>(key);
      } catch (const pt::ptree_error&) {
        throw ArgumentError("bad value for [" + name_ + "] " + key + ": '" + *v + "'");
      }
    }
  }
  void read_bool(const std::string& key, bool& value) {
    seen_.insert(key);
    if (auto v = tree_.get_optional<std::string>(key)) {
      if (*v == "true" || *v == "1" || *v == "on") {
        value = true;
      } else if (*v == "false" || *v == "0" || *v == "off") {
        value = false;
      } else {
        throw ArgumentError("bad boolean for [" + name_ + "] " + key + ": '" + *v + "'");
      }
    }
  }
  std::optional<std::string> raw(const std::string& key) {
    seen_.insert(key);
    if (auto v = tree_.get_optional<std::string>(key)) return *v;
    return std::nullopt;
  }

 private:
  std::string name_;
  pt::ptree tree_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& ini_text, const ExperimentConfig& base) {
  pt::ptree root;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ArgumentError(std::string("config parse error: ") + e.what());
  }
  static const std::set<std::string> kSections = {"scenario", "hyper", "toggles", "train"};
  for (const auto& [name, _] : root) {
    if (!kSections.count(name)) throw ArgumentError("unknown config section [" + name + "]");
  }

  ExperimentConfig cfg = base;
  {
    Section s(root, "scenario");
    if (auto preset = s.raw("preset")) cfg.scenario = scenario_presets(*preset);
    s.read("name", cfg.scenario.name);
    if (auto v = s.raw("common_classes")) cfg.scenario.common_classes = parse_int_list(*v);
    if (auto v = s.raw("source_private")) cfg.scenario.source_private = parse_int_list(*v);
    if (auto v = s.raw("target_private")) cfg.scenario.target_private = parse_int_list(*v);
    s.read("height", cfg.scenario.height);
    s.read("width", cfg.scenario.width);
    s.read("images_per_domain", cfg.scenario.images_per_domain);
    s.read("seed", cfg.scenario.seed);
    s.read("long_tail_decay", cfg.scenario.long_tail_decay);
    s.read("max_occurrence", cfg.scenario.max_occurrence);
    s.read("base_noise_std", cfg.scenario.base_noise_std);
    if (auto v = s.raw("popularity")) cfg.scenario.popularity = parse_int_list(*v);
    s.read("hue_shift", cfg.scenario.shift.hue_shift);
    s.read("noise_std", cfg.scenario.shift.noise_std);
    s.read("texture_freq", cfg.scenario.shift.texture_freq);
  }
  {
    Section s(root, "hyper");
    s.read("tau_p", cfg.hyper.tau_p);
    s.read("tau_t", cfg.hyper.tau_t);
    s.read("lambda1", cfg.hyper.lambda1);
    s.read("lambda2", cfg.hyper.lambda2);
    s.read("tau", cfg.hyper.tau);
    s.read("T", cfg.hyper.T);
    s.read("alpha", cfg.hyper.alpha);
    s.read("sigma", cfg.hyper.sigma);
  }
  {
    Section s(root, "toggles");
    s.read_bool("dspd_loss", cfg.toggles.dspd_loss);
    s.read_bool("dspd_weight", cfg.toggles.dspd_weight);
    s.read_bool("tim_matching", cfg.toggles.tim_matching);
    s.read_bool("target_rcs", cfg.toggles.target_rcs);
    s.read_bool("class_mix", cfg.toggles.class_mix);
    if (auto v = s.raw("weight_variant")) cfg.toggles.weight_variant = parse_weight_variant(*v);
  }
  {
    Section s(root, "train");
    s.read("steps", cfg.steps);
    s.read("batch", cfg.batch);
    s.read("seed", cfg.seed);
    s.read("lr", cfg.lr);
    s.read("weight_decay", cfg.weight_decay);
    s.read("momentum", cfg.momentum);
    s.read("patch_radius", cfg.patch_radius);
    if (auto v = s.raw("hidden")) cfg.hidden = parse_int_list(*v);
    s.read("embed_dim", cfg.embed_dim);
    s.read("rcs_refresh", cfg.rcs_refresh);
    s.read("tim_top_k", cfg.tim_top_k);
    s.read_bool("proto_weight_by_reliability", cfg.proto_weight_by_reliability);
    s.read_bool("proto_on_unknown", cfg.proto_on_unknown);
    if (auto v = s.raw("reliability_scope")) {
      if (*v == "known") {
        cfg.reliability_scope = ReliabilityScope::kKnownClasses;
      } else if (*v == "all") {
        cfg.reliability_scope = ReliabilityScope::kAllHeads;
      } else {
        throw ArgumentError("reliability_scope must be 'known' or 'all'");
      }
    }
    s.read("eval_every", cfg.eval_every);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

std::string config_to_ini(const ExperimentConfig& c) {
  std::ostringstream out;
  out.precision(17);
  auto b = [](bool v) { return v ? "true" : "false"; };
  const auto& s = c.scenario;
  out << "[scenario]\n"
      << "name = " << s.name << "\n"
      << "common_classes = " << join(s.common_classes) << "\n"
      << "source_private = " << join(s.source_private) << "\n"
      << "target_private = " << join(s.target_private) << "\n"
      << "height = " << s.height << "\n"
      << "width = " << s.width << "\n"
      << "images_per_domain = " << s.images_per_domain << "\n"
      << "seed = " << s.seed << "\n"
      << "long_tail_decay = " << s.long_tail_decay << "\n"
      << "max_occurrence = " << s.max_occurrence << "\n"
      << "base_noise_std = " << s.base_noise_std << "\n"
      << "popularity = " << join(s.popularity) << "\n"
      << "hue_shift = " << s.shift.hue_shift << "\n"
      << "noise_std = " << s.shift.noise_std << "\n"
      << "texture_freq = " << s.shift.texture_freq << "\n\n";
  const auto& h = c.hyper;
  out << "[hyper]\n"
      << "tau_p = " << h.tau_p << "\n"
      << "tau_t = " << h.tau_t << "\n"
      << "lambda1 = " << h.lambda1 << "\n"
      << "lambda2 = " << h.lambda2 << "\n"
      << "tau = " << h.tau << "\n"
      << "T = " << h.T << "\n"
      << "alpha = " << h.alpha << "\n"
      << "sigma = " << h.sigma << "\n\n";
  const auto& t = c.toggles;
  out << "[toggles]\n"
      << "dspd_loss = " << b(t.dspd_loss) << "\n"
      << "dspd_weight = " << b(t.dspd_weight) << "\n"
      << "tim_matching = " << b(t.tim_matching) << "\n"
      << "target_rcs = " << b(t.target_rcs) << "\n"
      << "class_mix = " << b(t.class_mix) << "\n"
      << "weight_variant = " << to_string(t.weight_variant) << "\n\n";
  out << "[train]\n"
      << "steps = " << c.steps << "\n"
      << "batch = " << c.batch << "\n"
      << "seed = " << c.seed << "\n"
      << "lr = " << c.lr << "\n"
      << "weight_decay = " << c.weight_decay << "\n"
      << "momentum = " << c.momentum << "\n"
      << "patch_radius = " << c.patch_radius << "\n"
      << "hidden = " << join(c.hidden) << "\n"
      << "embed_dim = " << c.embed_dim << "\n"
      << "rcs_refresh = " << c.rcs_refresh << "\n"
      << "tim_top_k = " << c.tim_top_k << "\n"
      << "proto_weight_by_reliability = " << b(c.proto_weight_by_reliability) << "\n"
      << "proto_on_unknown = " << b(c.proto_on_unknown) << "\n"
      << "reliability_scope = "
      << (c.reliability_scope == ReliabilityScope::kKnownClasses ? "known" : "all") << "\n"
      << "eval_every = " << c.eval_every << "\n";
  return out.str();
}

}  // namespace protomatch

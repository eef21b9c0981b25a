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

// Command-line driver: dataset generation, training, ablation, evaluation and
// source matching dumps.

#include <malloc.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "protomatch/config_io.hpp"
#include "protomatch/etf_bank.hpp"
#include "protomatch/experiment.hpp"
#include "protomatch/image_io.hpp"
#include "protomatch/tim_matching.hpp"

namespace fs = std::filesystem;
using namespace protomatch;

namespace {

fs::path output_root(const std::string& flag) {
  if (const char* env = std::getenv("PROTOMATCH_OUTPUT_ROOT"); env && *env) return env;
  return flag;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

ExperimentConfig resolve_config(const std::string& path, int steps, long long seed) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  if (steps > 0) cfg.steps = steps;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.validate();
  return cfg;
}

DomainPair load_or_generate(const std::string& data_dir, const ScenarioConfig& scenario) {
  return data_dir.empty() ? generate_domain_pair(scenario) : read_domain_pair(data_dir);
}

PixelNet load_net(const std::string& path) {
  auto [header, params] = load_checkpoint(path);
  PixelNet net(header.arch, header.seed);
  net.set_params(std::move(params));
  return net;
}

void write_predictions(const fs::path& dir, const PixelNet& net, const DomainPair& data,
                       int count) {
  fs::create_directories(dir);
  const int unknown = data.scenario.num_source_classes();
  const int n = std::min<int>(count, static_cast<int>(data.target.size()));
  TargetDataset subset([&] {
    std::vector<Image> images;
    for (int i = 0; i < n; ++i) images.push_back(data.target.image(i));
    return images;
  }());
  const auto preds = predict(net, subset);
  char name[32];
  for (int i = 0; i < n; ++i) {
    std::snprintf(name, sizeof(name), "pred_%04d.png", i);
    write_png((dir / name).string(), colorize_labels(preds[i], unknown));
  }
}

int cmd_gen(const std::string& config, const std::string& out) {
  const auto cfg = resolve_config(config, 0, -1);
  const auto data = generate_domain_pair(cfg.scenario);
  write_domain_pair(data, out);
  std::cout << "wrote " << data.source.size() << " source and " << data.target.size()
            << " target images to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& data_dir, const fs::path& run_dir,
              int steps, long long seed, int num_preds, bool quiet) {
  const auto cfg = resolve_config(config, steps, seed);
  const auto data = load_or_generate(data_dir, cfg.scenario);
  fs::create_directories(run_dir);
  write_text(run_dir / "config.ini", config_to_ini(cfg));

  TrainHooks hooks;
  if (!quiet) {
    hooks.on_eval = [](int step, const MetricsReport& r) {
      std::cerr << "step " << step << ": common " << r.common_miou << " private "
                << r.private_iou.value_or(0.0) << " h " << r.h_score << "\n";
    };
  }
  const auto result = train(cfg, data, hooks);

  write_text(run_dir / "metrics.json", report_to_json(result.report, data.scenario));
  write_text(run_dir / "losses.csv", loss_log_csv(result.log));
  CheckpointHeader header{cfg.architecture(), cfg.num_classes(), cfg.resolved_embed_dim(),
                          cfg.seed, cfg.steps};
  save_checkpoint((run_dir / "checkpoint.bin").string(), header, result.student.params());
  save_checkpoint((run_dir / "teacher.bin").string(), header, result.teacher.params());
  write_predictions(run_dir / "predictions", result.student, data, num_preds);
  std::cout << report_table({{"final", result.report}}, data.scenario);
  return 0;
}

int cmd_ablate(const std::string& config, const std::string& grid_name, int seeds, int jobs,
               const fs::path& run_dir, int steps, long long seed) {
  const auto cfg = resolve_config(config, steps, seed);
  const auto rows = ablate(cfg, ablation_grid(grid_name), seeds, jobs);
  const auto table = ablation_table(rows);
  fs::create_directories(run_dir);
  write_text(run_dir / "config.ini", config_to_ini(cfg));
  write_text(run_dir / "ablation.txt", table);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& rep : r.reports) {
      runs.push_back(nlohmann::json::parse(report_to_json(rep, cfg.scenario)));
    }
    j.push_back({{"name", r.name},
                 {"common", {r.common_mean, r.common_std}},
                 {"private", {r.private_mean, r.private_std}},
                 {"h_score", {r.h_mean, r.h_std}},
                 {"runs", runs}});
  }
  write_text(run_dir / "ablation.json", j.dump(2));
  std::cout << table;
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config,
             const std::string& data_dir, const fs::path& run_dir, int num_preds) {
  const auto cfg = resolve_config(config, 0, -1);
  const auto data = load_or_generate(data_dir, cfg.scenario);
  const PixelNet net = load_net(checkpoint);
  if (net.arch().num_heads != data.scenario.num_source_classes() + 1) {
    throw ArgumentError("checkpoint head count does not match the dataset");
  }
  const auto report = evaluate_model(net, data);
  fs::create_directories(run_dir);
  write_text(run_dir / "metrics.json", report_to_json(report, data.scenario));
  write_predictions(run_dir / "predictions", net, data, num_preds);
  std::cout << report_table({{"eval", report}}, data.scenario);
  return 0;
}

int cmd_match(const std::string& checkpoint, const std::string& config,
              const std::string& data_dir, int target, int top_k) {
  const auto cfg = resolve_config(config, 0, -1);
  const auto data = load_or_generate(data_dir, cfg.scenario);
  const PixelNet teacher = load_net(checkpoint);
  const int c = data.scenario.num_source_classes();
  if (target < 0 || target >= static_cast<int>(data.target.size())) {
    throw LookupError("target index out of range");
  }
  const auto out = teacher.forward(data.target.image(static_cast<std::size_t>(target)));
  WeightMap weights(out.probs.height, out.probs.width, 1.0);
  if (cfg.toggles.dspd_weight) {
    const auto bank = build_etf(c, cfg.resolved_embed_dim(), cfg.seed);
    LabelMap known(out.probs.height, out.probs.width, 0);
    for (int j = 0; j < out.probs.pixels(); ++j) {
      Eigen::Index best;
      out.probs.data.topRows(c).col(j).maxCoeff(&best);
      known[j] = static_cast<int>(best);
    }
    weights = weight_map(out.embeddings, known, bank, cfg.toggles.weight_variant,
                         cfg.hyper.sigma);
  }
  const auto pseudo = assign_pseudo_labels(out.probs, weights, cfg.hyper.tau_p);
  std::vector<LabelMap> labels;
  for (const auto& s : data.source.samples()) labels.push_back(s.labels);
  const auto index = SourceIndex::build(labels, c);
  const auto ranked = rank_sources(index, pseudo.classes, cfg.hyper.T);

  nlohmann::json j;
  j["target"] = target;
  j["temperature"] = cfg.hyper.T;
  j["candidates"] = nlohmann::json::array();
  for (int k = 0; k < std::min<int>(top_k, static_cast<int>(ranked.size())); ++k) {
    j["candidates"].push_back({{"id", ranked[k].id}, {"score", ranked[k].score}});
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 1 << 28);
  mallopt(M_TRIM_THRESHOLD, 1 << 28);
  CLI::App app{"protomatch: prototype matching for universal domain adaptive segmentation"};
  app.require_subcommand(1);
  std::string config, data_dir, root = "runs", name, checkpoint, grid = "ladder", out;
  int steps = 0, seeds = 3, jobs = 1, preds = 8, target = 0, top_k = 5;
  long long seed = -1;
  bool quiet = false;

  auto* gen = app.add_subcommand("gen", "generate a synthetic domain pair");
  gen->add_option("-c,--config", config, "INI config file");
  gen->add_option("-o,--out", out, "output dataset directory")->required();

  auto add_run_opts = [&](CLI::App* sub, const std::string& default_name) {
    sub->add_option("-c,--config", config, "INI config file");
    sub->add_option("--output-root", root, "run root (PROTOMATCH_OUTPUT_ROOT overrides)");
    sub->add_option("-n,--name", name, "run directory name")->default_str(default_name);
  };
  auto* tr = app.add_subcommand("train", "train one configuration");
  add_run_opts(tr, "train");
  tr->add_option("-d,--data", data_dir, "dataset directory (default: generate)");
  tr->add_option("--steps", steps, "override step count");
  tr->add_option("--seed", seed, "override training seed");
  tr->add_option("--predictions", preds, "number of prediction maps to save");
  tr->add_flag("-q,--quiet", quiet, "no progress output");

  auto* ab = app.add_subcommand("ablate", "run an ablation grid");
  add_run_opts(ab, "ablate");
  ab->add_option("-g,--grid", grid, "ladder | weights | proto | tim");
  ab->add_option("--seeds", seeds, "number of seeds");
  ab->add_option("-j,--jobs", jobs, "worker threads");
  ab->add_option("--steps", steps, "override step count");
  ab->add_option("--seed", seed, "first seed");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_run_opts(ev, "eval");
  ev->add_option("-k,--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("-d,--data", data_dir, "dataset directory (default: generate)");
  ev->add_option("--predictions", preds, "number of prediction maps to save");

  auto* ma = app.add_subcommand("match", "dump the top-k source matches of a target image");
  ma->add_option("-c,--config", config, "INI config file");
  ma->add_option("-k,--checkpoint", checkpoint, "teacher checkpoint")->required();
  ma->add_option("-d,--data", data_dir, "dataset directory (default: generate)");
  ma->add_option("-t,--target", target, "target image index");
  ma->add_option("--top-k", top_k, "number of candidates");

  CLI11_PARSE(app, argc, argv);
  try {
    const auto run_dir = [&](const char* fallback) {
      return output_root(root) / (name.empty() ? fallback : name);
    };
    if (*gen) return cmd_gen(config, out);
    if (*tr) return cmd_train(config, data_dir, run_dir("train"), steps, seed, preds, quiet);
    if (*ab) return cmd_ablate(config, grid, seeds, jobs, run_dir("ablate"), steps, seed);
    if (*ev) return cmd_eval(checkpoint, config, data_dir, run_dir("eval"), preds);
    if (*ma) return cmd_match(checkpoint, config, data_dir, target, top_k);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

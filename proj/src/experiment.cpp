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

#include "protomatch/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <future>
#include <random>
#include <sstream>

#include "protomatch/etf_bank.hpp"
#include "protomatch/tim_matching.hpp"

namespace protomatch {
namespace {

// Independent random streams so that toggling one decision never shifts the
// draws of another.
enum Stream : std::uint64_t {
  kInitStream = 1,
  kTargetStream = 2,
  kSourceStream = 3,
  kMixStream = 4,
  kRcsStream = 5,
  kTopKStream = 6,
};

std::uint64_t stream_seed(std::uint64_t seed, Stream s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

LabelMap known_argmax(const ProbabilityMap& probs) {
  const int known = static_cast<int>(probs.data.rows()) - 1;
  LabelMap out(probs.height, probs.width, 0);
  for (int j = 0; j < probs.pixels(); ++j) {
    int best = 0;
    for (int c = 1; c < known; ++c) {
      if (probs.data(c, j) > probs.data(best, j)) best = c;
    }
    out[j] = best;
  }
  return out;
}

struct TeacherPass {
  NetOutput out;
  WeightMap weights;
  PseudoLabelMap pseudo;
};

TeacherPass teacher_pseudo_labels(const PixelNet& teacher, const Image& image,
                                  const ExperimentConfig& cfg, const PrototypeBank& bank) {
  TeacherPass pass;
  pass.out = teacher.forward(image);
  if (cfg.toggles.dspd_weight) {
    // A pixel with an all-zero embedding has no direction to compare; routing
    // it through the unknown index gives it the neutral weight 1.
    LabelMap cls = known_argmax(pass.out.probs);
    for (std::size_t j = 0; j < cls.size(); ++j) {
      if (!(pass.out.embeddings.data.col(static_cast<Eigen::Index>(j)).squaredNorm() > 0.0)) {
        cls[j] = cfg.num_classes();
      }
    }
    pass.weights = weight_map(pass.out.embeddings, cls, bank, cfg.toggles.weight_variant,
                              cfg.hyper.sigma);
  } else {
    pass.weights = WeightMap(image.height, image.width, 1.0);
  }
  pass.pseudo = assign_pseudo_labels(pass.out.probs, pass.weights, cfg.hyper.tau_p);
  pass.pseudo.reliability =
      image_reliability(pass.out.probs, cfg.hyper.tau_t, cfg.reliability_scope);
  return pass;
}

std::vector<std::int64_t> known_counts(const LabelMap& labels, int num_classes) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (const int v : labels.values) {
    if (v < num_classes) ++counts[v];
  }
  return counts;
}

void refresh_rcs(TargetRareClassSampler& sampler, const PixelNet& teacher,
                 const TargetDataset& target, const ExperimentConfig& cfg,
                 const PrototypeBank& bank) {
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto pass = teacher_pseudo_labels(teacher, target.image(i), cfg, bank);
    sampler.set_counts(static_cast<int>(i), known_counts(pass.pseudo.classes, cfg.num_classes()));
  }
  sampler.refresh();
}

// Mean prototype loss over the pixels of one image; stores the raw-embedding
// gradient in `embed_grad`. Pixels with an all-zero embedding are left out.
double proto_term(const NetOutput& out, const std::vector<int>& classes,
                  const std::vector<Domain>& domains, std::vector<double> scales,
                  const PrototypeBank& bank, const ProtoLossConfig& pcfg,
                  Eigen::MatrixXd& embed_grad) {
  const Eigen::MatrixXd* raw = &out.embeddings.data;
  Eigen::MatrixXd patched;
  for (Eigen::Index j = 0; j < raw->cols(); ++j) {
    if (raw->col(j).squaredNorm() > 0.0) continue;
    if (patched.size() == 0) {
      patched = *raw;
      if (scales.empty()) scales.assign(static_cast<std::size_t>(raw->cols()), 1.0);
    }
    patched.col(j) = bank.column(0);
    scales[static_cast<std::size_t>(j)] = 0.0;
  }
  if (patched.size() != 0) raw = &patched;
  const Eigen::MatrixXd units = normalize_columns(*raw);
  auto res = proto_loss_batch(units, classes, domains, bank, pcfg, scales);
  const double n = static_cast<double>(units.cols());
  embed_grad = normalized_to_raw_grad(*raw, res.grad / n);
  return res.loss / n;
}

}  // namespace

NetArchitecture ExperimentConfig::architecture() const {
  NetArchitecture a;
  a.channels = 3;
  a.patch_radius = patch_radius;
  a.hidden = hidden;
  a.embed_dim = resolved_embed_dim();
  a.num_heads = num_classes() + 1;
  return a;
}

void ExperimentConfig::validate() const {
  scenario.validate();
  if (!(hyper.tau_p > 0.0 && hyper.tau_p < 1.0) || !(hyper.tau_t > 0.0 && hyper.tau_t < 1.0)) {
    throw ArgumentError("ExperimentConfig: thresholds must lie in (0, 1)");
  }
  if (!(hyper.alpha >= 0.0 && hyper.alpha <= 1.0)) {
    throw ArgumentError("ExperimentConfig: alpha must lie in [0, 1]");
  }
  if (!(hyper.T > 0.0) || !(hyper.tau > 0.0) || !(hyper.sigma > 0.0)) {
    throw ArgumentError("ExperimentConfig: temperatures must be > 0");
  }
  if (hyper.lambda1 < 0.0 || hyper.lambda2 < 0.0) {
    throw ArgumentError("ExperimentConfig: lambdas must be >= 0");
  }
  if (steps < 1) throw ArgumentError("ExperimentConfig: steps must be >= 1");
  if (batch < 1) throw ArgumentError("ExperimentConfig: batch must be >= 1");
  if (!(lr > 0.0)) throw ArgumentError("ExperimentConfig: lr must be > 0");
  if (weight_decay < 0.0 || momentum < 0.0 || momentum >= 1.0) {
    throw ArgumentError("ExperimentConfig: bad weight_decay or momentum");
  }
  if (rcs_refresh < 1 || tim_top_k < 1) {
    throw ArgumentError("ExperimentConfig: rcs_refresh and tim_top_k must be >= 1");
  }
  if (embed_dim != 0 && embed_dim < 2 * num_classes() + 1) {
    throw DimensionError("ExperimentConfig: embed_dim must be >= 2C+1");
  }
}

std::vector<LabelMap> predict(const PixelNet& net, const TargetDataset& target) {
  std::vector<LabelMap> out;
  out.reserve(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto fwd = net.forward(target.image(i));
    LabelMap pred(fwd.probs.height, fwd.probs.width, 0);
    for (int j = 0; j < fwd.probs.pixels(); ++j) {
      Eigen::Index best;
      fwd.probs.data.col(j).maxCoeff(&best);
      pred[j] = static_cast<int>(best);
    }
    out.push_back(std::move(pred));
  }
  return out;
}

MetricsReport evaluate_model(const PixelNet& net, const DomainPair& data) {
  return evaluate(predict(net, data.target), data.target_truth.all(), data.scenario);
}

TrainResult train(const ExperimentConfig& cfg, const TrainHooks& hooks) {
  return train(cfg, generate_domain_pair(cfg.scenario), hooks);
}

TrainResult train(const ExperimentConfig& cfg, const DomainPair& data, const TrainHooks& hooks) {
  cfg.validate();
  if (data.source.size() == 0 || data.target.size() == 0) {
    throw ArgumentError("train: empty dataset");
  }
  const int num_classes = cfg.num_classes();
  const int unknown = num_classes;
  const PrototypeBank bank = build_etf(num_classes, cfg.resolved_embed_dim(), cfg.seed);
  ProtoLossConfig pcfg{cfg.hyper.lambda1, cfg.hyper.lambda2, cfg.hyper.tau, cfg.hyper.sigma};
  pcfg.validate();

  TrainResult result;
  result.student = PixelNet(cfg.architecture(), stream_seed(cfg.seed, kInitStream));
  result.teacher = result.student;
  PixelNet& student = result.student;
  PixelNet& teacher = result.teacher;

  std::vector<LabelMap> source_labels;
  source_labels.reserve(data.source.size());
  for (const auto& s : data.source.samples()) source_labels.push_back(s.labels);
  const SourceIndex index = SourceIndex::build(source_labels, num_classes);

  std::mt19937_64 target_rng(stream_seed(cfg.seed, kTargetStream));
  std::mt19937_64 source_rng(stream_seed(cfg.seed, kSourceStream));
  std::mt19937_64 mix_rng(stream_seed(cfg.seed, kMixStream));
  std::mt19937_64 topk_rng(stream_seed(cfg.seed, kTopKStream));
  std::uniform_int_distribution<int> pick_target(0, static_cast<int>(data.target.size()) - 1);
  std::uniform_int_distribution<int> pick_source(0, static_cast<int>(data.source.size()) - 1);
  TargetRareClassSampler rcs(static_cast<int>(data.target.size()), num_classes, cfg.hyper.T,
                             stream_seed(cfg.seed, kRcsStream));

  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(student.params().size());
  result.log.reserve(static_cast<std::size_t>(cfg.steps));

  for (int step = 0; step < cfg.steps; ++step) {
    if (cfg.toggles.target_rcs && step % cfg.rcs_refresh == 0) {
      refresh_rcs(rcs, teacher, data.target, cfg, bank);
    }
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(student.params().size());
    StepLog entry;
    entry.step = step;
    double src_sum = 0.0, tgt_sum = 0.0, proto_sum = 0.0;

    for (int b = 0; b < cfg.batch; ++b) {
      // (1) target image
      const int uniform_target = pick_target(target_rng);
      const int t_idx = cfg.toggles.target_rcs ? rcs.sample() : uniform_target;
      const Image& t_img = data.target.image(static_cast<std::size_t>(t_idx));

      // (2) teacher pseudo-labels
      const TeacherPass pass = teacher_pseudo_labels(teacher, t_img, cfg, bank);

      // (3) source image
      const int uniform_source = pick_source(source_rng);
      int s_idx = uniform_source;
      // With no class overlap every score is zero and matching carries no
      // information, so the uniform draw stands.
      if (cfg.toggles.tim_matching &&
          rank_sources(index, pass.pseudo.classes, cfg.hyper.T).front().score > 0.0) {
        s_idx = static_cast<int>(index.position_of(
            cfg.tim_top_k == 1
                ? select_source(index, pass.pseudo, cfg.hyper.T)
                : select_source_top_k(index, pass.pseudo, cfg.hyper.T, cfg.tim_top_k, topk_rng)));
      }
      const SegSample& src = data.source[static_cast<std::size_t>(s_idx)];

      if (hooks.on_pseudo_labels) {
        hooks.on_pseudo_labels(
            {step, t_idx, s_idx, &pass.out.probs, &pass.weights, &pass.pseudo});
      }

      // (4) mixing
      MixedSample mixed;
      if (cfg.toggles.class_mix) {
        mixed = class_mix(src, t_img, pass.pseudo, mix_rng);
      } else {
        mixed.image = t_img;
        mixed.labels = pass.pseudo;
        mixed.pasted = Grid<std::uint8_t>(t_img.height, t_img.width, 0);
      }

      // (5) student forward
      const NetOutput s_out = student.forward(src.image);
      const NetOutput m_out = student.forward(mixed.image);
      const double ns = static_cast<double>(s_out.probs.pixels());
      const double nm = static_cast<double>(m_out.probs.pixels());

      // (6) losses, each a per-pixel mean
      SegLossGrad ls = source_seg_loss(s_out.probs, src.labels);
      SegLossGrad lt = target_seg_loss(m_out.probs, mixed.labels);
      ls.logit_grad /= ns;
      lt.logit_grad /= nm;
      src_sum += ls.loss / ns;
      tgt_sum += lt.loss / nm;

      Eigen::MatrixXd s_embed_grad, m_embed_grad;
      if (cfg.toggles.dspd_loss) {
        const std::vector<Domain> s_domains(src.labels.size(), Domain::kSource);
        proto_sum += proto_term(s_out, src.labels.values, s_domains, {}, bank, pcfg, s_embed_grad);

        std::vector<Domain> m_domains(mixed.labels.classes.size());
        std::vector<double> m_scales;
        for (std::size_t j = 0; j < m_domains.size(); ++j) {
          m_domains[j] = mixed.pasted[j] ? Domain::kSource : Domain::kTarget;
        }
        if (cfg.proto_weight_by_reliability || !cfg.proto_on_unknown) {
          m_scales.assign(m_domains.size(), 1.0);
          for (std::size_t j = 0; j < m_domains.size(); ++j) {
            if (mixed.pasted[j]) continue;
            if (cfg.proto_weight_by_reliability) m_scales[j] = mixed.labels.reliability;
            if (!cfg.proto_on_unknown && mixed.labels.classes[j] == cfg.num_classes()) {
              m_scales[j] = 0.0;
            }
          }
        }
        proto_sum += proto_term(m_out, mixed.labels.classes.values, m_domains, m_scales, bank,
                                pcfg, m_embed_grad);
      }

      // (7) reverse pass
      grad += student.backward(s_out, ls.logit_grad, s_embed_grad);
      grad += student.backward(m_out, lt.logit_grad, m_embed_grad);

      entry.reliability += pass.pseudo.reliability / cfg.batch;
      std::int64_t n_unknown = 0;
      for (const int v : pass.pseudo.classes.values) n_unknown += v == unknown ? 1 : 0;
      entry.unknown_fraction +=
          static_cast<double>(n_unknown) / pass.pseudo.classes.size() / cfg.batch;
      entry.target_image = t_idx;
      entry.source_image = s_idx;
    }

    const double inv_batch = 1.0 / cfg.batch;
    entry.losses = LossBreakdown::of(src_sum * inv_batch, tgt_sum * inv_batch, proto_sum * inv_batch);
    if (!std::isfinite(entry.losses.total)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << ": source=" << entry.losses.source_seg
          << " target=" << entry.losses.target_seg << " proto=" << entry.losses.proto
          << " target_image=" << entry.target_image << " source_image=" << entry.source_image;
      throw TrainingAbort(msg.str());
    }
    grad *= inv_batch;
    if (cfg.momentum > 0.0) {
      if (!grad.allFinite()) throw TrainingAbort("non-finite gradient at step " + std::to_string(step));
      velocity = cfg.momentum * velocity + grad;
      student.set_params(sgd_step(student.params(), velocity, cfg.lr, cfg.weight_decay));
    } else {
      student.set_params(sgd_step(student.params(), grad, cfg.lr, cfg.weight_decay));
    }

    // (8) teacher update
    teacher.set_params(ema_update(teacher.params(), student.params(), cfg.hyper.alpha));
    result.log.push_back(entry);

    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0 && step + 1 < cfg.steps) {
      auto rep = evaluate_model(student, data);
      if (hooks.on_eval) hooks.on_eval(step + 1, rep);
      result.checkpoints.emplace_back(step + 1, std::move(rep));
    }
  }
  result.report = evaluate_model(student, data);
  if (hooks.on_eval) hooks.on_eval(cfg.steps, result.report);
  return result;
}

std::string loss_log_csv(const std::vector<StepLog>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "step,source_seg,target_seg,proto,total,reliability,unknown_fraction,target_image,"
         "source_image\n";
  for (const auto& e : log) {
    out << e.step << "," << e.losses.source_seg << "," << e.losses.target_seg << ","
        << e.losses.proto << "," << e.losses.total << "," << e.reliability << ","
        << e.unknown_fraction << "," << e.target_image << "," << e.source_image << "\n";
  }
  return out.str();
}

std::vector<AblationCell> ablation_grid(const std::string& name) {
  auto dspd = [](ExperimentConfig& c) {
    c.toggles.dspd_loss = true;
    c.toggles.dspd_weight = true;
  };
  auto tim = [](ExperimentConfig& c) {
    c.toggles.tim_matching = true;
    c.toggles.target_rcs = true;
  };
  auto none = [](ExperimentConfig& c) {
    c.toggles.dspd_loss = c.toggles.dspd_weight = false;
    c.toggles.tim_matching = c.toggles.target_rcs = false;
  };
  if (name == "ladder") {
    return {
        {"baseline", none},
        {"+DSPD", [=](ExperimentConfig& c) { none(c); dspd(c); }},
        {"+TIM", [=](ExperimentConfig& c) { none(c); tim(c); }},
        {"+DSPD+TIM", [=](ExperimentConfig& c) { none(c); dspd(c); tim(c); }},
    };
  }
  if (name == "weights") {
    std::vector<AblationCell> grid;
    for (const auto v : {WeightVariant::kOurs, WeightVariant::kAbs, WeightVariant::kGaussian,
                         WeightVariant::kMean}) {
      grid.push_back({std::string("w_") + to_string(v), [=](ExperimentConfig& c) {
                        dspd(c);
                        tim(c);
                        c.toggles.weight_variant = v;
                      }});
    }
    return grid;
  }
  if (name == "proto") {
    auto lambdas = [=](double l1, double l2) {
      return [=](ExperimentConfig& c) {
        dspd(c);
        tim(c);
        c.hyper.lambda1 = l1;
        c.hyper.lambda2 = l2;
      };
    };
    return {
        {"CE", lambdas(0.0, 0.0)},
        {"CE+PPC", lambdas(0.01, 0.0)},
        {"CE+PPD", lambdas(0.0, 0.01)},
        {"CE+PPC+PPD", lambdas(0.01, 0.01)},
    };
  }
  if (name == "tim") {
    return {
        {"DSPD", [=](ExperimentConfig& c) { none(c); dspd(c); }},
        {"DSPD+match", [=](ExperimentConfig& c) { none(c); dspd(c); c.toggles.tim_matching = true; }},
        {"DSPD+rcs", [=](ExperimentConfig& c) { none(c); dspd(c); c.toggles.target_rcs = true; }},
        {"DSPD+match+rcs", [=](ExperimentConfig& c) { none(c); dspd(c); tim(c); }},
    };
  }
  throw ArgumentError("unknown ablation grid '" + name + "'");
}

std::vector<AblationRow> ablate(const ExperimentConfig& base,
                                const std::vector<AblationCell>& grid, int num_seeds, int jobs) {
  if (grid.empty()) throw ArgumentError("ablate: empty grid");
  if (num_seeds < 1) throw ArgumentError("ablate: num_seeds must be >= 1");

  struct Job {
    std::size_t cell;
    int seed_offset;
  };
  std::vector<Job> work;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    for (int s = 0; s < num_seeds; ++s) work.push_back({c, s});
  }
  auto run = [&](const Job& job) {
    ExperimentConfig cfg = base;
    grid[job.cell].apply(cfg);
    cfg.seed = base.seed + static_cast<std::uint64_t>(job.seed_offset);
    cfg.scenario.seed = base.scenario.seed + static_cast<std::uint64_t>(job.seed_offset);
    auto result = train(cfg);
    return std::make_pair(std::move(result.report), std::move(result.log));
  };
  using Outcome = std::pair<MetricsReport, std::vector<StepLog>>;

  std::vector<Outcome> reports(work.size());
  if (jobs <= 1) {
    for (std::size_t k = 0; k < work.size(); ++k) reports[k] = run(work[k]);
  } else {
    for (std::size_t start = 0; start < work.size(); start += static_cast<std::size_t>(jobs)) {
      std::vector<std::future<Outcome>> futures;
      const std::size_t end = std::min(work.size(), start + static_cast<std::size_t>(jobs));
      for (std::size_t k = start; k < end; ++k) {
        futures.push_back(std::async(std::launch::async, run, work[k]));
      }
      for (std::size_t k = start; k < end; ++k) reports[k] = futures[k - start].get();
    }
  }

  auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (const double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (const double x : v) var += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  };

  std::vector<AblationRow> rows(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    rows[c].name = grid[c].name;
    std::vector<double> common, priv, h;
    for (std::size_t k = 0; k < work.size(); ++k) {
      if (work[k].cell != c) continue;
      const auto& r = reports[k].first;
      rows[c].reports.push_back(r);
      rows[c].logs.push_back(reports[k].second);
      common.push_back(r.common_miou);
      priv.push_back(r.private_iou.value_or(0.0));
      h.push_back(r.h_score);
    }
    mean_std(common, rows[c].common_mean, rows[c].common_std);
    mean_std(priv, rows[c].private_mean, rows[c].private_std);
    mean_std(h, rows[c].h_mean, rows[c].h_std);
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::size_t w = 8;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  std::ostringstream out;
  char buf[128];
  out << std::string(w, ' ') << "        Common         Private         H-score\n";
  for (const auto& r : rows) {
    out << r.name << std::string(w - r.name.size(), ' ');
    std::snprintf(buf, sizeof(buf), "  %6.2f +- %5.2f  %6.2f +- %5.2f  %6.2f +- %5.2f\n",
                  100 * r.common_mean, 100 * r.common_std, 100 * r.private_mean,
                  100 * r.private_std, 100 * r.h_mean, 100 * r.h_std);
    out << buf;
  }
  return out.str();
}

}  // namespace protomatch

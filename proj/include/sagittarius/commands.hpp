// Copyright 2026 Sagittarius Authors
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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sagittarius/checkpoint.hpp"
#include "sagittarius/config.hpp"
#include "sagittarius/data.hpp"
#include "sagittarius/eval.hpp"
#include "sagittarius/gradcheck.hpp"
#include "sagittarius/model.hpp"
#include "sagittarius/synthetic.hpp"
#include "sagittarius/topk.hpp"
#include "sagittarius/training.hpp"

namespace sagittarius {

// Parsed records, id maps over the full dataset, the split, and the training
// graph (full index, train edges only; unit weights under the -Behavior
// ablation). Users and items seen only in validation/test keep their ids but
// have no training edges.
struct DataBundle {
  std::vector<InteractionRecord> records;
  IdIndex index;
  DatasetSplit split;
  BipartiteGraph train_graph;
};

inline DataBundle load_data(const ExperimentConfig& cfg) {
  std::ifstream in(cfg.data_path, std::ios::binary);
  if (!in) fail("io", "cannot open dataset '" + cfg.data_path + "'");
  DataBundle bundle;
  bundle.records = parse_interactions(in, cfg.format, cfg.scores);
  if (bundle.records.empty()) fail("data", "dataset '" + cfg.data_path + "' is empty");
  bundle.index = IdIndex(bundle.records);
  bundle.split = split_dataset(bundle.records, cfg.ratios, cfg.split_seed);
  bundle.train_graph = build_graph(bundle.split.train, bundle.index);
  if (cfg.disable_behavior_weighting) {
    bundle.train_graph = strip_behavior_weights(std::move(bundle.train_graph));
  }
  return bundle;
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail("io", "cannot create output directory '" + dir + "'");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io", "cannot open '" + path + "' for writing");
  return out;
}

inline std::string format_epoch_line(const EpochStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d, %.10g, %.10g, %.10g, %.10g, %.10g\n",
                s.epoch, s.l1, s.l2, s.l3, s.total, s.val_urecall);
  return buf;
}

}  // namespace detail

struct TrainArtifacts {
  std::string checkpoint_path;
  std::string loss_history_path;
  std::string resolved_config_path;
  TrainState state;
};

// data -> fit -> best checkpoint + loss history + resolved config.
inline TrainArtifacts cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::ensure_dir(cfg.output_dir);
  const DataBundle bundle = load_data(cfg);
  const Hyperparams hyper = cfg.effective_hyper();

  TrainArtifacts artifacts;
  artifacts.loss_history_path = cfg.output_dir + "/loss_history.csv";
  auto history = detail::open_out(artifacts.loss_history_path);
  history << "epoch, l1, l2, l3, total, val_urecall@10\n";

  artifacts.state = fit(bundle.train_graph, bundle.split, hyper,
                        [&](const EpochStats& s) {
                          history << detail::format_epoch_line(s);
                          history.flush();
                        });

  artifacts.checkpoint_path = cfg.output_dir + "/checkpoint.bin";
  save_checkpoint({hyper, bundle.index, artifacts.state.best_params},
                  artifacts.checkpoint_path);

  artifacts.resolved_config_path = cfg.output_dir + "/config.resolved.ini";
  detail::open_out(artifacts.resolved_config_path) << render_config(cfg);
  return artifacts;
}

// One report per k, written as `metrics_k<K>.txt` (one-line record) and
// `metrics_k<K>.kv` (key-value document).
inline std::vector<MetricsReport> cmd_evaluate(const std::string& checkpoint_path,
                                               const ExperimentConfig& cfg) {
  cfg.validate();
  detail::ensure_dir(cfg.output_dir);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);

  std::ifstream in(cfg.data_path, std::ios::binary);
  if (!in) fail("io", "cannot open dataset '" + cfg.data_path + "'");
  const auto records = parse_interactions(in, cfg.format, cfg.scores);
  const DatasetSplit split = split_dataset(records, cfg.ratios, cfg.split_seed);
  BipartiteGraph train_graph = build_graph(split.train, ckpt.index);
  if (cfg.disable_behavior_weighting) {
    train_graph = strip_behavior_weights(std::move(train_graph));
  }

  const NodeEmbeddings emb = forward(train_graph, ckpt.params, ckpt.hyper);
  std::vector<MetricsReport> reports;
  for (int k : cfg.k_list) {
    const MetricsReport r = evaluate(train_graph, emb.z_u, emb.z_v,
                                     ckpt.params.Q1, split.test, k, cfg.workers);
    detail::open_out(cfg.output_dir + "/metrics_k" + std::to_string(k) + ".txt")
        << r.to_line() << "\n";
    detail::open_out(cfg.output_dir + "/metrics_k" + std::to_string(k) + ".kv")
        << r.to_kv();
    reports.push_back(r);
  }
  return reports;
}

inline RecommendationBatch cmd_recommend(const std::string& checkpoint_path,
                                         const ExperimentConfig& cfg, int k,
                                         int n_workers,
                                         const std::string& out_path) {
  cfg.validate();
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);

  std::ifstream in(cfg.data_path, std::ios::binary);
  if (!in) fail("io", "cannot open dataset '" + cfg.data_path + "'");
  const auto records = parse_interactions(in, cfg.format, cfg.scores);
  const DatasetSplit split = split_dataset(records, cfg.ratios, cfg.split_seed);
  BipartiteGraph train_graph = build_graph(split.train, ckpt.index);
  if (cfg.disable_behavior_weighting) {
    train_graph = strip_behavior_weights(std::move(train_graph));
  }

  const NodeEmbeddings emb = forward(train_graph, ckpt.params, ckpt.hyper);
  std::vector<std::vector<int>> seen(train_graph.n_users);
  for (int u = 0; u < train_graph.n_users; ++u) {
    seen[u].reserve(train_graph.user_adj[u].size());
    for (const auto& [v, w] : train_graph.user_adj[u]) seen[u].push_back(v);
  }
  const RecommendationBatch batch = generate_topk(
      emb.z_u, emb.z_v, ckpt.params.Q1, seen, k, n_workers, ckpt.index);
  write_recommendations(batch, out_path);
  return batch;
}

struct AblationRow {
  std::string variant;
  MetricsReport metrics;
};

// Trains and evaluates the five variants at k=10: full model, then one
// component removed at a time.
inline std::vector<AblationRow> cmd_ablate(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::ensure_dir(cfg.output_dir);

  struct Variant {
    const char* name;
    bool no_ctr, no_seq, no_bpr, no_behavior;
  };
  const Variant variants[] = {
      {"full", false, false, false, false},
      {"-CTR", true, false, false, false},
      {"-Sequence", false, true, false, false},
      {"-BPR", false, false, true, false},
      {"-Behavior", false, false, false, true},
  };

  std::vector<AblationRow> rows;
  auto table = detail::open_out(cfg.output_dir + "/ablation.csv");
  table << "variant,recall@10,urecall@10,ndcg@10\n";
  for (const Variant& var : variants) {
    ExperimentConfig vcfg = cfg;
    vcfg.disable_ctr = var.no_ctr;
    vcfg.disable_seq = var.no_seq;
    vcfg.disable_bpr = var.no_bpr;
    vcfg.disable_behavior_weighting = var.no_behavior;

    const DataBundle bundle = load_data(vcfg);
    const TrainState state =
        fit(bundle.train_graph, bundle.split, vcfg.effective_hyper());
    const MetricsReport r = evaluate(bundle.train_graph, state.best_params,
                                     vcfg.effective_hyper(), bundle.split.test,
                                     10, cfg.workers);
    char line[160];
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f\n", var.name, r.recall,
                  r.urecall, r.ndcg);
    table << line;
    table.flush();
    rows.push_back({var.name, r});
  }
  return rows;
}

inline GradCheckReport cmd_gradcheck(const ExperimentConfig& cfg,
                                     const std::string& corrupt_tensor = "") {
  const Hyperparams h = cfg.effective_hyper();
  return run_default_gradcheck(h.lambda1, h.lambda2, h.lambda3, h.seed,
                               corrupt_tensor);
}

struct SweepPoint {
  double lambda = 0.0;
  MetricsReport metrics;
};

// Varies one loss weight over [0.7, 1.3] step 0.1 with the others pinned to
// 1, retraining at every point; emits sweep_lambda<i>.csv.
inline std::vector<SweepPoint> cmd_sweep(const ExperimentConfig& cfg,
                                         int lambda_index) {
  cfg.validate();
  if (lambda_index < 1 || lambda_index > 3) {
    fail("usage", "sweep: lambda index must be 1, 2 or 3");
  }
  detail::ensure_dir(cfg.output_dir);

  std::vector<SweepPoint> points;
  auto curve = detail::open_out(cfg.output_dir + "/sweep_lambda" +
                                std::to_string(lambda_index) + ".csv");
  curve << "lambda,recall@10,urecall@10,ndcg@10\n";
  for (int step = 0; step <= 6; ++step) {
    const double value = 0.7 + 0.1 * step;
    ExperimentConfig vcfg = cfg;
    vcfg.hyper.lambda1 = lambda_index == 1 ? value : 1.0;
    vcfg.hyper.lambda2 = lambda_index == 2 ? value : 1.0;
    vcfg.hyper.lambda3 = lambda_index == 3 ? value : 1.0;

    const DataBundle bundle = load_data(vcfg);
    const TrainState state =
        fit(bundle.train_graph, bundle.split, vcfg.effective_hyper());
    const MetricsReport r = evaluate(bundle.train_graph, state.best_params,
                                     vcfg.effective_hyper(), bundle.split.test,
                                     10, cfg.workers);
    char line[160];
    std::snprintf(line, sizeof(line), "%.1f,%.6f,%.6f,%.6f\n", value, r.recall,
                  r.urecall, r.ndcg);
    curve << line;
    curve.flush();
    points.push_back({value, r});
  }
  return points;
}

}  // namespace sagittarius

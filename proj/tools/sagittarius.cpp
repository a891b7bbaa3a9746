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

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sagittarius/commands.hpp"

namespace {

using namespace sagittarius;

struct CommonOpts {
  std::string config_path;
  std::string checkpoint_path;
  std::string out_path;
  int k = 0;
  int workers = 0;
  long long seed = -1;
  bool seed_set = false;
};

ExperimentConfig load_cfg(const CommonOpts& opts) {
  if (opts.config_path.empty()) fail("usage", "--config is required");
  ExperimentConfig cfg = parse_config_file(opts.config_path);
  if (opts.seed_set) cfg.hyper.seed = static_cast<std::uint64_t>(opts.seed);
  if (!opts.out_path.empty()) cfg.output_dir = opts.out_path;
  if (opts.workers > 0) cfg.workers = opts.workers;
  return cfg;
}

int run_train(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_cfg(opts);
  const TrainArtifacts art = cmd_train(cfg);
  std::printf("best epoch %d, validation URecall@10 %.6f\n",
              art.state.best_epoch, art.state.best_val_urecall);
  std::printf("checkpoint: %s\n", art.checkpoint_path.c_str());
  std::printf("loss history: %s\n", art.loss_history_path.c_str());
  std::printf("resolved config: %s\n", art.resolved_config_path.c_str());
  return 0;
}

int run_evaluate(const CommonOpts& opts) {
  ExperimentConfig cfg = load_cfg(opts);
  if (opts.k > 0) cfg.k_list = {opts.k};
  if (opts.checkpoint_path.empty()) fail("usage", "--checkpoint is required");
  const auto reports = cmd_evaluate(opts.checkpoint_path, cfg);
  for (const auto& r : reports) {
    std::printf("k=%d recall=%.6f urecall=%.6f ndcg=%.6f users=%d\n", r.k,
                r.recall, r.urecall, r.ndcg, r.n_users_evaluated);
  }
  return 0;
}

int run_recommend(const CommonOpts& opts) {
  ExperimentConfig cfg = load_cfg(opts);
  if (opts.checkpoint_path.empty()) fail("usage", "--checkpoint is required");
  const int k = opts.k > 0 ? opts.k : cfg.k_list.front();
  const int workers = opts.workers > 0 ? opts.workers : cfg.workers;
  const std::string out =
      opts.out_path.empty() ? cfg.output_dir + "/recommendations.csv"
                            : opts.out_path;
  // --out names the CSV file here, not a directory.
  cfg.output_dir = ".";
  const RecommendationBatch batch =
      cmd_recommend(opts.checkpoint_path, cfg, k, workers, out);
  std::printf("wrote %zu rows (k=%d) to %s\n", batch.rows.size(), k,
              out.c_str());
  return 0;
}

int run_ablate(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_cfg(opts);
  const auto rows = cmd_ablate(cfg);
  std::printf("%-10s %10s %10s %10s\n", "variant", "recall@10", "urecall@10",
              "ndcg@10");
  for (const auto& row : rows) {
    std::printf("%-10s %10.6f %10.6f %10.6f\n", row.variant.c_str(),
                row.metrics.recall, row.metrics.urecall, row.metrics.ndcg);
  }
  return 0;
}

int run_gradcheck(const CommonOpts& opts, const std::string& corrupt) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = parse_config_file(opts.config_path);
  if (opts.seed_set) cfg.hyper.seed = static_cast<std::uint64_t>(opts.seed);
  const GradCheckReport report = cmd_gradcheck(cfg, corrupt);
  for (const auto& e : report.entries) {
    std::printf("%-8s %-10s max_rel_err=%.3e\n", e.passed ? "PASS" : "FAIL",
                e.tensor.c_str(), e.max_rel_err);
  }
  std::printf("gradcheck %s (tolerance %.1e, fd step %.1e)\n",
              report.passed ? "PASSED" : "FAILED", report.tolerance,
              report.fd_step);
  return report.passed ? 0 : 1;
}

int run_sweep(const CommonOpts& opts, int lambda_index) {
  const ExperimentConfig cfg = load_cfg(opts);
  for (int i = lambda_index == 0 ? 1 : lambda_index;
       i <= (lambda_index == 0 ? 3 : lambda_index); ++i) {
    const auto points = cmd_sweep(cfg, i);
    for (const auto& p : points) {
      std::printf("lambda%d=%.1f recall=%.6f urecall=%.6f ndcg=%.6f\n", i,
                  p.lambda, p.metrics.recall, p.metrics.urecall,
                  p.metrics.ndcg);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sagittarius: behavior-aware bipartite-graph convolutional recommender"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string corrupt_tensor;
  int lambda_index = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "experiment config file");
    sub->add_option("--checkpoint", opts.checkpoint_path, "model checkpoint");
    sub->add_option("--k", opts.k, "top-k cutoff");
    sub->add_option("--workers", opts.workers, "worker threads");
    sub->add_option("--out", opts.out_path, "output path");
    sub->add_option("--seed", opts.seed, "seed override")
        ->each([&](const std::string&) { opts.seed_set = true; });
  };

  CLI::App* train = app.add_subcommand("train", "train a model");
  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
  CLI::App* recommend =
      app.add_subcommand("recommend", "batch top-k recommendation generation");
  CLI::App* ablate = app.add_subcommand("ablate", "train the five ablation variants");
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient verification");
  CLI::App* sweep = app.add_subcommand("sweep", "loss-weight sensitivity sweep");
  for (CLI::App* sub : {train, evaluate, recommend, ablate, gradcheck, sweep}) {
    add_common(sub);
  }
  gradcheck->add_option("--corrupt", corrupt_tensor,
                        "perturb one analytic tensor (detector self-test)");
  sweep->add_option("--lambda", lambda_index, "sweep only this loss weight (1-3)")
      ->check(CLI::Range(1, 3));

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return run_train(opts);
    if (evaluate->parsed()) return run_evaluate(opts);
    if (recommend->parsed()) return run_recommend(opts);
    if (ablate->parsed()) return run_ablate(opts);
    if (gradcheck->parsed()) return run_gradcheck(opts, corrupt_tensor);
    if (sweep->parsed()) return run_sweep(opts, lambda_index);
  } catch (const sagittarius::Error& e) {
    std::cerr << "error:" << e.category() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error:internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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

#include <string>
#include <vector>

#include "sagittarius/common.hpp"
#include "sagittarius/data.hpp"
#include "sagittarius/model.hpp"
#include "sagittarius/training.hpp"

namespace sagittarius {

struct GradCheckEntry {
  std::string tensor;
  double max_rel_err = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 1e-4;
  double fd_step = 1e-5;
  bool passed = true;
};

// Central finite differences of the weighted total loss against the analytic
// backward pass, coordinate by coordinate. Relative error uses
// |a - f| / max(1e-6, |a|, |f|) so near-zero coordinates compare on an
// absolute scale. `corrupt_tensor` perturbs one analytic tensor; it exists so
// the detector itself can be tested.
inline GradCheckReport gradient_check(
    const BipartiteGraph& graph, const ModelParams& params,
    const Hyperparams& hyper, const std::vector<TrainQuadruple>& quads,
    const std::vector<InteractionSequence>& sequences, double fd_step = 1e-5,
    double tolerance = 1e-4, const std::string& corrupt_tensor = "") {
  GradCheckReport report;
  report.tolerance = tolerance;
  report.fd_step = fd_step;

  ModelParams analytic =
      compute_gradients(graph, params, hyper, quads, sequences);
  if (!corrupt_tensor.empty()) {
    bool found = false;
    analytic.for_each_tensor([&](const std::string& name, Mat& m) {
      if (name == corrupt_tensor && m.size() > 0) {
        m(0, 0) += 1.0;
        found = true;
      }
    });
    if (!found) fail("usage", "no tensor named '" + corrupt_tensor + "'");
  }

  ModelParams probe = params;
  std::vector<Mat*> probe_tensors;
  std::vector<std::string> names;
  probe.for_each_tensor([&](const std::string& name, Mat& m) {
    probe_tensors.push_back(&m);
    names.push_back(name);
  });
  std::vector<const Mat*> analytic_tensors;
  analytic.for_each_tensor([&](const std::string&, const Mat& m) {
    analytic_tensors.push_back(&m);
  });

  for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
    Mat& m = *probe_tensors[t];
    const Mat& a = *analytic_tensors[t];
    GradCheckEntry entry;
    entry.tensor = names[t];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double saved = m(i, j);
        m(i, j) = saved + fd_step;
        const double up =
            compute_losses(graph, probe, hyper, quads, sequences).total(hyper);
        m(i, j) = saved - fd_step;
        const double down =
            compute_losses(graph, probe, hyper, quads, sequences).total(hyper);
        m(i, j) = saved;
        const double fd = (up - down) / (2.0 * fd_step);
        const double rel = std::abs(a(i, j) - fd) /
                           std::max({1e-6, std::abs(a(i, j)), std::abs(fd)});
        entry.max_rel_err = std::max(entry.max_rel_err, rel);
      }
    }
    entry.passed = entry.max_rel_err <= tolerance;
    report.passed = report.passed && entry.passed;
    report.entries.push_back(entry);
  }
  return report;
}

// Fixed 5-user / 5-item / 8-edge instance; three users have sequences so all
// loss paths are exercised.
inline std::vector<InteractionRecord> gradcheck_records() {
  auto rec = [](const char* u, const char* i, const char* b, std::int64_t t,
                double s) {
    return InteractionRecord{u, i, b, t, s};
  };
  return {
      rec("u0", "i0", "b1", 0, 1.0), rec("u0", "i1", "b3", 1, 3.0),
      rec("u0", "i2", "b2", 2, 2.0), rec("u0", "i3", "b1", 3, 1.0),
      rec("u1", "i1", "b2", 4, 2.0), rec("u2", "i2", "b2", 5, 2.0),
      rec("u3", "i3", "b1", 6, 1.0), rec("u4", "i4", "b2", 7, 2.0),
  };
}

// Default tiny-instance gradient check used by the CLI and the acceptance
// suite.
inline GradCheckReport run_default_gradcheck(
    double lambda1 = 1.0, double lambda2 = 1.0, double lambda3 = 1.0,
    std::uint64_t seed = 0, const std::string& corrupt_tensor = "") {
  const auto records = gradcheck_records();
  const BipartiteGraph graph = build_graph(records);

  Hyperparams hyper;
  hyper.embed_dim = 6;
  hyper.final_dim = 5;
  hyper.n_layers = 2;
  hyper.lambda1 = lambda1;
  hyper.lambda2 = lambda2;
  hyper.lambda3 = lambda3;
  hyper.n_negatives = 2;
  hyper.max_seq_len = 4;
  hyper.seed = seed;

  const ModelParams params = init_params(graph, hyper);
  Rng rng(seed + 1);
  const auto quads = make_quadruples(graph, hyper.n_negatives, rng);
  const auto sequences =
      build_sequences(records, graph.index, hyper.max_seq_len);
  return gradient_check(graph, params, hyper, quads, sequences, 1e-5, 1e-4,
                        corrupt_tensor);
}

}  // namespace sagittarius

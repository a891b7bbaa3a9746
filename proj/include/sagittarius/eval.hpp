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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "sagittarius/common.hpp"
#include "sagittarius/data.hpp"
#include "sagittarius/model.hpp"

namespace sagittarius {

struct MetricsReport {
  int k = 0;
  double recall = 0.0;
  double urecall = 0.0;
  double ndcg = 0.0;
  int n_users_evaluated = 0;

  std::string to_line() const {
    std::ostringstream os;
    os << k << ", " << recall << ", " << urecall << ", " << ndcg << ", "
       << n_users_evaluated;
    return os.str();
  }

  std::string to_kv() const {
    std::ostringstream os;
    os << "k = " << k << "\n"
       << "recall = " << recall << "\n"
       << "urecall = " << urecall << "\n"
       << "ndcg = " << ndcg << "\n"
       << "n_users_evaluated = " << n_users_evaluated << "\n";
    return os.str();
  }
};

// Items sorted by affinity descending, seen items removed, truncated to k.
// Ties broken by ascending dense item id. Reference (full-sort) route; the
// topk module reproduces it with a bounded selection.
inline std::vector<int> rank_items(const Eigen::Ref<const Vec>& z_u,
                                   const Mat& z_v, const Mat& Q1,
                                   const std::unordered_set<int>& seen, int k) {
  if (k < 1) fail("usage", "rank_items: k must be >= 1");
  Vec scores = z_v * (Q1.transpose() * z_u);
  std::vector<int> ids;
  ids.reserve(scores.size());
  for (int v = 0; v < scores.size(); ++v) {
    if (seen.count(v) == 0) ids.push_back(v);
  }
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    return scores(a) != scores(b) ? scores(a) > scores(b) : a < b;
  });
  if (static_cast<int>(ids.size()) > k) ids.resize(k);
  return ids;
}

inline int urecall_at_k(const std::vector<int>& topk,
                        const std::unordered_set<int>& positives) {
  for (int v : topk) {
    if (positives.count(v) != 0) return 1;
  }
  return 0;
}

inline double recall_at_k(const std::vector<int>& topk,
                          const std::unordered_set<int>& positives) {
  if (positives.empty()) return 0.0;
  int hits = 0;
  for (int v : topk) hits += positives.count(v) != 0 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(positives.size());
}

// DCG with 1/log2(rank+1) gains over binary relevance; ideal DCG places
// min(k, |positives|) hits at the top.
inline double ndcg_at_k(const std::vector<int>& topk,
                        const std::unordered_set<int>& positives, int k) {
  if (positives.empty()) return 0.0;
  double dcg = 0.0;
  for (std::size_t i = 0; i < topk.size(); ++i) {
    if (positives.count(topk[i]) != 0) {
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
  }
  const std::size_t ideal =
      std::min<std::size_t>(static_cast<std::size_t>(k), positives.size());
  double idcg = 0.0;
  for (std::size_t i = 0; i < ideal; ++i) {
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

// Test positives grouped per dense user id. Any behavior counts as positive.
inline std::map<int, std::unordered_set<int>> group_positives(
    const std::vector<InteractionRecord>& records, const IdIndex& index) {
  std::map<int, std::unordered_set<int>> by_user;
  for (const auto& r : records) {
    by_user[index.user_id(r.user_id)].insert(index.item_id(r.item_id));
  }
  return by_user;
}

// Ranks all items for every evaluable user (has test positives and at least
// one training edge), filtering that user's train-split items, and averages
// the per-user metrics. Per-user work is parallel over read-only state with a
// deterministic ordered reduction.
inline MetricsReport evaluate(const BipartiteGraph& graph_train,
                              const Mat& z_u, const Mat& z_v, const Mat& Q1,
                              const std::vector<InteractionRecord>& test_records,
                              int k, int n_threads = 1) {
  if (k < 1) fail("usage", "evaluate: k must be >= 1");
  auto positives_by_user = group_positives(test_records, graph_train.index);

  std::vector<int> users;
  users.reserve(positives_by_user.size());
  for (const auto& [u, pos] : positives_by_user) {
    if (!pos.empty() && graph_train.user_degrees[u] > 0) users.push_back(u);
  }
  if (users.empty()) fail("data", "evaluate: no evaluable users");

  struct Partial {
    double recall = 0.0;
    double urecall = 0.0;
    double ndcg = 0.0;
  };
  n_threads = std::max(1, n_threads);
  std::vector<Partial> partials(n_threads);
  auto work = [&](int tid) {
    const std::size_t n = users.size();
    const std::size_t lo = n * tid / n_threads;
    const std::size_t hi = n * (tid + 1) / n_threads;
    Partial acc;
    for (std::size_t i = lo; i < hi; ++i) {
      const int u = users[i];
      std::unordered_set<int> seen;
      for (const auto& [v, w] : graph_train.user_adj[u]) seen.insert(v);
      const auto topk = rank_items(z_u.row(u).transpose(), z_v, Q1, seen, k);
      const auto& pos = positives_by_user.at(u);
      acc.recall += recall_at_k(topk, pos);
      acc.urecall += urecall_at_k(topk, pos);
      acc.ndcg += ndcg_at_k(topk, pos, k);
    }
    partials[tid] = acc;
  };
  if (n_threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work, t);
    for (auto& t : pool) t.join();
  }

  MetricsReport report;
  report.k = k;
  report.n_users_evaluated = static_cast<int>(users.size());
  for (const Partial& p : partials) {
    report.recall += p.recall;
    report.urecall += p.urecall;
    report.ndcg += p.ndcg;
  }
  report.recall /= users.size();
  report.urecall /= users.size();
  report.ndcg /= users.size();
  return report;
}

inline MetricsReport evaluate(const BipartiteGraph& graph_train,
                              const ModelParams& params,
                              const Hyperparams& hyper,
                              const std::vector<InteractionRecord>& test_records,
                              int k, int n_threads = 1) {
  NodeEmbeddings emb = forward(graph_train, params, hyper);
  return evaluate(graph_train, emb.z_u, emb.z_v, params.Q1, test_records, k,
                  n_threads);
}

}  // namespace sagittarius

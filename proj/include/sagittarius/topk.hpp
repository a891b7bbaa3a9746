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

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sagittarius/common.hpp"
#include "sagittarius/data.hpp"

namespace sagittarius {

// One user's top-k list: unique unseen items, scores non-increasing.
struct RecommendationRow {
  std::string user_id;
  std::vector<std::pair<std::string, double>> items;  // (item key, score)
};

struct RecommendationBatch {
  int k = 0;
  std::vector<RecommendationRow> rows;  // ascending dense user id
};

namespace detail {

// Bounded top-k selection over a score vector, skipping seen items. Order:
// higher score first, ties by ascending dense item id. `seen_mask` is a
// reusable |V| byte mask, all zero on entry and on exit.
inline std::vector<int> select_topk(const Vec& scores,
                                    const std::vector<int>& seen, int k,
                                    std::vector<char>& seen_mask) {
  for (int v : seen) seen_mask[v] = 1;
  auto better = [&](int a, int b) {
    return scores(a) != scores(b) ? scores(a) > scores(b) : a < b;
  };
  // Min-heap on "better": the weakest kept candidate sits at heap[0].
  auto heap_cmp = [&](int a, int b) { return better(a, b); };
  std::vector<int> heap;
  heap.reserve(k + 1);
  for (int v = 0; v < scores.size(); ++v) {
    if (seen_mask[v]) continue;
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back(v);
      std::push_heap(heap.begin(), heap.end(), heap_cmp);
    } else if (better(v, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), heap_cmp);
      heap.back() = v;
      std::push_heap(heap.begin(), heap.end(), heap_cmp);
    }
  }
  std::sort(heap.begin(), heap.end(), better);
  for (int v : seen) seen_mask[v] = 0;
  return heap;
}

}  // namespace detail

// Data-parallel batch scoring: users are block-partitioned across workers,
// every worker reads the shared (z_v, Q1) and writes a private slice, and the
// slices concatenate in user order. Output is a pure function of the inputs,
// independent of n_workers.
inline RecommendationBatch generate_topk(
    const Mat& z_u, const Mat& z_v, const Mat& Q1,
    const std::vector<std::vector<int>>& seen_sets, int k, int n_workers,
    const IdIndex& index) {
  if (k < 1) fail("usage", "generate_topk: k must be >= 1");
  if (n_workers < 1) fail("usage", "generate_topk: n_workers must be >= 1");
  const int n_users = static_cast<int>(z_u.rows());
  const int n_items = static_cast<int>(z_v.rows());

  RecommendationBatch batch;
  batch.k = k;
  batch.rows.resize(n_users);

  const Mat proj = z_v * Q1.transpose();  // row v = (Q1 z_v)^T
  auto work = [&](int tid) {
    const int lo = static_cast<int>(static_cast<long>(n_users) * tid / n_workers);
    const int hi =
        static_cast<int>(static_cast<long>(n_users) * (tid + 1) / n_workers);
    std::vector<char> seen_mask(n_items, 0);
    for (int u = lo; u < hi; ++u) {
      const Vec scores = proj * z_u.row(u).transpose();
      const auto top = detail::select_topk(scores, seen_sets[u], k, seen_mask);
      RecommendationRow& row = batch.rows[u];
      row.user_id = index.user_keys[u];
      row.items.reserve(top.size());
      for (int v : top) row.items.emplace_back(index.item_keys[v], scores(v));
    }
  };
  if (n_workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(work, t);
    for (auto& t : pool) t.join();
  }
  return batch;
}

// CSV writer; gzip-compressed when the sink name ends in ".gz".
inline void write_recommendations(const RecommendationBatch& batch,
                                  const std::string& path) {
  std::string body = "user_id,rank,item_id,score\n";
  char line[256];
  for (const auto& row : batch.rows) {
    for (std::size_t i = 0; i < row.items.size(); ++i) {
      std::snprintf(line, sizeof(line), ",%zu,", i + 1);
      body += row.user_id;
      body += line;
      body += row.items[i].first;
      std::snprintf(line, sizeof(line), ",%.6f\n", row.items[i].second);
      body += line;
    }
  }

  if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (f == nullptr) fail("io", "cannot open '" + path + "' for writing");
    const int written =
        gzwrite(f, body.data(), static_cast<unsigned>(body.size()));
    gzclose(f);
    if (written != static_cast<int>(body.size())) {
      fail("io", "short gzip write to '" + path + "'");
    }
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io", "cannot open '" + path + "' for writing");
  out << body;
  if (!out) fail("io", "write failure on '" + path + "'");
}

}  // namespace sagittarius

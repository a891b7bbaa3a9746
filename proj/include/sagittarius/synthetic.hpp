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

namespace sagittarius {

// Random interaction log used by gradcheck, the demo configs, and tests.
// Behaviors are "b1".."bK" with scores 1..K. A mild popularity and user-taste
// skew keeps the data non-degenerate for ranking.
inline std::vector<InteractionRecord> make_synthetic_records(
    int n_users, int n_items, int n_records, int n_behaviors,
    std::uint64_t seed) {
  if (n_users < 1 || n_items < 1 || n_records < 1 || n_behaviors < 1) {
    fail("usage", "make_synthetic_records: all sizes must be >= 1");
  }
  BehaviorScoreMap scores;
  for (int b = 1; b <= n_behaviors; ++b) {
    scores.add("b" + std::to_string(b), static_cast<double>(b));
  }

  Rng rng(seed);
  std::vector<InteractionRecord> out;
  out.reserve(n_records);
  for (int i = 0; i < n_records; ++i) {
    const int u = static_cast<int>(uniform_index(rng, n_users));
    // Squaring a uniform draw skews item picks toward low ids (popular head);
    // offsetting by the user id gives each user a taste cluster.
    const double x = uniform_unit(rng);
    const int base = static_cast<int>(x * x * n_items);
    const int v = (base + u * 7) % n_items;
    const int b = 1 + static_cast<int>(uniform_index(rng, n_behaviors));
    InteractionRecord rec;
    rec.user_id = "u" + std::to_string(u);
    rec.item_id = "i" + std::to_string(v);
    rec.behavior = "b" + std::to_string(b);
    rec.timestamp = static_cast<std::int64_t>(i);
    rec.score = scores.score(rec.behavior);
    out.push_back(std::move(rec));
  }
  return out;
}

// Same edges, unit weight everywhere: the "-Behavior" ablation.
inline BipartiteGraph strip_behavior_weights(BipartiteGraph graph) {
  for (auto& e : graph.edges) e.weight = 1.0;
  for (auto& adj : graph.user_adj) {
    for (auto& [v, w] : adj) w = 1.0;
  }
  for (auto& adj : graph.item_adj) {
    for (auto& [u, w] : adj) w = 1.0;
  }
  return graph;
}

}  // namespace sagittarius

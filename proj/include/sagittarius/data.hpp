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
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sagittarius/common.hpp"

namespace sagittarius {

// Maps a behavior label to its a-priori preference score. Scores are strictly
// positive; "no interaction" is implicitly 0 and never stored. In numeric
// identity mode (used for rating datasets) any label that parses as a positive
// decimal is its own score; everything else is an error.
class BehaviorScoreMap {
 public:
  BehaviorScoreMap() = default;

  static BehaviorScoreMap numeric_identity() {
    BehaviorScoreMap m;
    m.numeric_identity_ = true;
    return m;
  }

  void add(const std::string& label, double score) {
    if (!(score > 0.0)) {
      fail("config", "behavior score for '" + label + "' must be > 0");
    }
    entries_[label] = score;
  }

  double score(const std::string& label) const {
    auto it = entries_.find(label);
    if (it != entries_.end()) return it->second;
    if (numeric_identity_) {
      double v = 0.0;
      std::size_t pos = 0;
      try {
        v = std::stod(label, &pos);
      } catch (const std::exception&) {
        fail("data", "unknown behavior label '" + label + "'");
      }
      if (pos != label.size() || !(v > 0.0)) {
        fail("data", "unknown behavior label '" + label + "'");
      }
      return v;
    }
    fail("data", "unknown behavior label '" + label + "'");
  }

  bool empty() const { return entries_.empty() && !numeric_identity_; }
  bool is_numeric_identity() const { return numeric_identity_; }
  const std::map<std::string, double>& entries() const { return entries_; }

 private:
  std::map<std::string, double> entries_;
  bool numeric_identity_ = false;
};

// One (user, item, behavior, timestamp) event with its resolved score.
struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  std::string behavior;
  std::int64_t timestamp = 0;
  double score = 0.0;
};

enum class InputFormat { movielens_tab, generic_csv };

inline InputFormat parse_input_format(const std::string& s) {
  if (s == "movielens_tab") return InputFormat::movielens_tab;
  if (s == "generic_csv") return InputFormat::generic_csv;
  fail("config", "unknown dataset format '" + s + "'");
}

inline std::vector<InteractionRecord> parse_interactions(
    std::istream& in, InputFormat format, const BehaviorScoreMap& score_map) {
  std::vector<InteractionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  const char sep = format == InputFormat::movielens_tab ? '\t' : ',';

  if (format == InputFormat::generic_csv) {
    ++lineno;
    if (!std::getline(in, line)) {
      return out;  // empty stream, vacuously fine
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "user_id,item_id,behavior,timestamp") {
      fail("data", "line 1: expected header 'user_id,item_id,behavior,timestamp'");
    }
  }

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string, 4> fields;
    std::size_t n_fields = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == sep) {
        if (n_fields == 4) {
          fail("data", "line " + std::to_string(lineno) + ": too many fields");
        }
        fields[n_fields++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    if (n_fields != 4) {
      fail("data", "line " + std::to_string(lineno) + ": expected 4 fields, got " +
                       std::to_string(n_fields));
    }
    InteractionRecord rec;
    rec.user_id = fields[0];
    rec.item_id = fields[1];
    // movielens_tab: user<TAB>item<TAB>rating<TAB>timestamp; the rating string
    // is the behavior label. generic_csv: user,item,behavior,timestamp.
    rec.behavior = fields[2];
    if (rec.user_id.empty() || rec.item_id.empty() || rec.behavior.empty()) {
      fail("data", "line " + std::to_string(lineno) + ": empty field");
    }
    try {
      std::size_t pos = 0;
      rec.timestamp = std::stoll(fields[3], &pos);
      if (pos != fields[3].size()) throw std::invalid_argument(fields[3]);
    } catch (const std::exception&) {
      fail("data", "line " + std::to_string(lineno) + ": bad timestamp '" +
                       fields[3] + "'");
    }
    if (rec.timestamp < 0) {
      fail("data", "line " + std::to_string(lineno) + ": negative timestamp");
    }
    rec.score = score_map.score(rec.behavior);
    out.push_back(std::move(rec));
  }
  return out;
}

// Bidirectional external key <-> dense id maps. Dense ids are assigned in
// first-appearance order so runs are reproducible.
struct IdIndex {
  std::vector<std::string> user_keys;
  std::vector<std::string> item_keys;
  std::unordered_map<std::string, int> user_ids;
  std::unordered_map<std::string, int> item_ids;

  IdIndex() = default;

  explicit IdIndex(const std::vector<InteractionRecord>& records) {
    for (const auto& r : records) {
      intern(r.user_id, user_keys, user_ids);
      intern(r.item_id, item_keys, item_ids);
    }
  }

  int n_users() const { return static_cast<int>(user_keys.size()); }
  int n_items() const { return static_cast<int>(item_keys.size()); }

  int user_id(const std::string& key) const {
    auto it = user_ids.find(key);
    if (it == user_ids.end()) fail("data", "unknown user key '" + key + "'");
    return it->second;
  }
  int item_id(const std::string& key) const {
    auto it = item_ids.find(key);
    if (it == item_ids.end()) fail("data", "unknown item key '" + key + "'");
    return it->second;
  }

 private:
  static void intern(const std::string& key, std::vector<std::string>& keys,
                     std::unordered_map<std::string, int>& ids) {
    auto [it, inserted] = ids.try_emplace(key, static_cast<int>(keys.size()));
    if (inserted) keys.push_back(key);
    (void)it;
  }
};

// Deduplicated weighted user-item adjacency. At most one edge per (user,
// item); the weight is the maximum behavior score observed for the pair.
struct BipartiteGraph {
  struct Edge {
    int u;
    int v;
    double weight;
  };

  IdIndex index;
  int n_users = 0;
  int n_items = 0;
  std::vector<Edge> edges;  // sorted by (u, v)
  std::vector<std::vector<std::pair<int, double>>> user_adj;  // u -> (v, w)
  std::vector<std::vector<std::pair<int, double>>> item_adj;  // v -> (u, w)
  std::vector<int> user_degrees;
  std::vector<int> item_degrees;

  bool has_edge(int u, int v) const {
    const auto& adj = user_adj[u];
    auto it = std::lower_bound(
        adj.begin(), adj.end(), v,
        [](const std::pair<int, double>& e, int key) { return e.first < key; });
    return it != adj.end() && it->first == v;
  }
};

inline BipartiteGraph build_graph(const std::vector<InteractionRecord>& records,
                                  IdIndex index) {
  BipartiteGraph g;
  g.index = std::move(index);
  g.n_users = g.index.n_users();
  g.n_items = g.index.n_items();

  // Collapse multiple behaviors on one pair to the strongest score.
  std::map<std::pair<int, int>, double> dedup;
  for (const auto& r : records) {
    const int u = g.index.user_id(r.user_id);
    const int v = g.index.item_id(r.item_id);
    auto [it, inserted] = dedup.try_emplace({u, v}, r.score);
    if (!inserted) it->second = std::max(it->second, r.score);
  }

  g.user_adj.resize(g.n_users);
  g.item_adj.resize(g.n_items);
  g.edges.reserve(dedup.size());
  for (const auto& [uv, w] : dedup) {
    g.edges.push_back({uv.first, uv.second, w});
    g.user_adj[uv.first].emplace_back(uv.second, w);
    g.item_adj[uv.second].emplace_back(uv.first, w);
  }
  for (auto& adj : g.item_adj) std::sort(adj.begin(), adj.end());

  g.user_degrees.resize(g.n_users);
  g.item_degrees.resize(g.n_items);
  for (int u = 0; u < g.n_users; ++u)
    g.user_degrees[u] = static_cast<int>(g.user_adj[u].size());
  for (int v = 0; v < g.n_items; ++v)
    g.item_degrees[v] = static_cast<int>(g.item_adj[v].size());
  return g;
}

inline BipartiteGraph build_graph(const std::vector<InteractionRecord>& records) {
  if (records.empty()) fail("data", "build_graph: no interaction records");
  return build_graph(records, IdIndex(records));
}

struct DatasetSplit {
  std::vector<InteractionRecord> train;
  std::vector<InteractionRecord> validation;
  std::vector<InteractionRecord> test;
  std::uint64_t seed = 0;
};

inline DatasetSplit split_dataset(const std::vector<InteractionRecord>& records,
                                  std::array<double, 3> ratios,
                                  std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0)) fail("config", "split ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    fail("config", "split ratios must sum to 1");
  }
  const std::size_t n = records.size();
  if (n < 3) fail("data", "split_dataset: need at least 3 records");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // Fisher-Yates with our own index draw so the permutation is stable across
  // standard library implementations.
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = uniform_index(rng, i + 1);
    std::swap(order[i], order[j]);
  }

  std::size_t n_train = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * ratios[0]));
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * ratios[1]));
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);

  DatasetSplit split;
  split.seed = seed;
  split.train.reserve(n_train);
  split.validation.reserve(n_val);
  split.test.reserve(n - n_train - n_val);
  for (std::size_t i = 0; i < n; ++i) {
    const InteractionRecord& r = records[order[i]];
    if (i < n_train) {
      split.train.push_back(r);
    } else if (i < n_train + n_val) {
      split.validation.push_back(r);
    } else {
      split.test.push_back(r);
    }
  }
  return split;
}

// Time-ordered dense item ids of one user's interactions, length in
// [2, max_seq_len]; truncation keeps the most recent items.
struct InteractionSequence {
  std::string user_id;
  std::vector<int> item_ids;
};

inline std::vector<InteractionSequence> build_sequences(
    const std::vector<InteractionRecord>& records, const IdIndex& index,
    int max_seq_len) {
  if (max_seq_len < 2) fail("config", "max_seq_len must be >= 2");

  struct Event {
    std::int64_t t;
    std::size_t input_order;
    int item;
  };
  std::map<int, std::vector<Event>> by_user;  // dense user id -> events
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    by_user[index.user_id(r.user_id)].push_back(
        {r.timestamp, i, index.item_id(r.item_id)});
  }

  std::vector<InteractionSequence> out;
  for (auto& [u, events] : by_user) {
    if (events.size() < 2) continue;
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
      return a.t != b.t ? a.t < b.t : a.input_order < b.input_order;
    });
    const std::size_t keep =
        std::min(events.size(), static_cast<std::size_t>(max_seq_len));
    InteractionSequence seq;
    seq.user_id = index.user_keys[u];
    seq.item_ids.reserve(keep);
    for (std::size_t i = events.size() - keep; i < events.size(); ++i) {
      seq.item_ids.push_back(events[i].item);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace sagittarius

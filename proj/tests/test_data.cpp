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

#include <catch2/catch_amalgamated.hpp>
#include <map>
#include <set>
#include <sstream>

#include "sagittarius/data.hpp"
#include "sagittarius/synthetic.hpp"

using namespace sagittarius;

TEST_CASE("behavior score map rejects non-positive scores and unknown labels") {
  BehaviorScoreMap m;
  CHECK_THROWS_AS(m.add("click", 0.0), Error);
  CHECK_THROWS_AS(m.add("click", -1.0), Error);
  m.add("share", 4.0);
  CHECK(m.score("share") == 4.0);
  CHECK_THROWS_AS(m.score("download"), Error);
}

TEST_CASE("numeric identity map scores rating labels as their value") {
  const auto m = BehaviorScoreMap::numeric_identity();
  CHECK(m.score("3") == 3.0);
  CHECK(m.score("4.5") == 4.5);
  CHECK_THROWS_AS(m.score("zero"), Error);
  CHECK_THROWS_AS(m.score("0"), Error);
  CHECK_THROWS_AS(m.score("-2"), Error);
}

TEST_CASE("parse_interactions movielens_tab") {
  std::istringstream in("196\t242\t3\t881250949\n186\t302\t3\t891717742\n");
  const auto recs =
      parse_interactions(in, InputFormat::movielens_tab,
                         BehaviorScoreMap::numeric_identity());
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].user_id == "196");
  CHECK(recs[0].item_id == "242");
  CHECK(recs[0].behavior == "3");
  CHECK(recs[0].score == 3.0);
  CHECK(recs[0].timestamp == 881250949);
}

TEST_CASE("parse_interactions empty stream yields empty list") {
  std::istringstream in("");
  CHECK(parse_interactions(in, InputFormat::movielens_tab,
                           BehaviorScoreMap::numeric_identity())
            .empty());
  std::istringstream csv("");
  CHECK(parse_interactions(csv, InputFormat::generic_csv,
                           BehaviorScoreMap::numeric_identity())
            .empty());
}

TEST_CASE("parse_interactions generic_csv with explicit score map") {
  BehaviorScoreMap m;
  m.add("share", 4.0);
  std::istringstream in("user_id,item_id,behavior,timestamp\nu1,i1,share,100\n");
  const auto recs = parse_interactions(in, InputFormat::generic_csv, m);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].score == 4.0);
}

TEST_CASE("parse_interactions errors carry line numbers and labels") {
  const auto ident = BehaviorScoreMap::numeric_identity();
  {
    std::istringstream in("196\t242\t3\n");
    CHECK_THROWS_WITH(parse_interactions(in, InputFormat::movielens_tab, ident),
                      Catch::Matchers::ContainsSubstring("line 1"));
  }
  {
    std::istringstream in("196\t242\t3\t100\n1\t2\t3\tnot_a_time\n");
    CHECK_THROWS_WITH(parse_interactions(in, InputFormat::movielens_tab, ident),
                      Catch::Matchers::ContainsSubstring("line 2"));
  }
  {
    BehaviorScoreMap m;
    m.add("click", 1.0);
    std::istringstream in("user_id,item_id,behavior,timestamp\nu1,i1,warp,1\n");
    CHECK_THROWS_WITH(parse_interactions(in, InputFormat::generic_csv, m),
                      Catch::Matchers::ContainsSubstring("warp"));
  }
  {
    std::istringstream in("wrong,header\n");
    CHECK_THROWS_AS(parse_interactions(in, InputFormat::generic_csv, ident),
                    Error);
  }
}

namespace {

InteractionRecord rec(const std::string& u, const std::string& i, double score,
                      std::int64_t t = 0) {
  return {u, i, "b", t, score};
}

}  // namespace

TEST_CASE("build_graph basics") {
  const auto g = build_graph({rec("u1", "i1", 2.5)});
  CHECK(g.n_users == 1);
  CHECK(g.n_items == 1);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].weight == 2.5);
  CHECK(g.user_degrees[0] == 1);
  CHECK(g.item_degrees[0] == 1);
}

TEST_CASE("build_graph collapses duplicate pairs to the max score") {
  const auto g = build_graph({rec("u1", "i1", 1.0), rec("u1", "i1", 4.0)});
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].weight == 4.0);
}

TEST_CASE("build_graph degree counting") {
  const auto g = build_graph(
      {rec("u1", "i1", 1.0), rec("u1", "i2", 1.0), rec("u2", "i1", 1.0)});
  CHECK(g.user_degrees == std::vector<int>{2, 1});
  CHECK(g.item_degrees == std::vector<int>{2, 1});
}

TEST_CASE("build_graph rejects empty input") {
  CHECK_THROWS_AS(build_graph({}), Error);
}

TEST_CASE("graph round-trip recovers deduplicated max-score edge set") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto records = make_synthetic_records(6, 9, 40, 4, 1000 + trial);
    const auto g = build_graph(records);

    std::map<std::pair<std::string, std::string>, double> expected;
    for (const auto& r : records) {
      auto& w = expected[{r.user_id, r.item_id}];
      w = std::max(w, r.score);
    }
    REQUIRE(g.edges.size() == expected.size());
    for (const auto& e : g.edges) {
      CHECK(e.weight ==
            expected.at({g.index.user_keys[e.u], g.index.item_keys[e.v]}));
      CHECK(e.weight > 0.0);
    }
    // adjacency views hold the same edge set
    std::size_t user_view = 0, item_view = 0;
    for (const auto& adj : g.user_adj) user_view += adj.size();
    for (const auto& adj : g.item_adj) item_view += adj.size();
    CHECK(user_view == g.edges.size());
    CHECK(item_view == g.edges.size());
  }
}

TEST_CASE("split_dataset sizes and determinism") {
  const auto records = make_synthetic_records(5, 8, 10, 3, 1);
  const auto s = split_dataset(records, {0.7, 0.1, 0.2}, 42);
  CHECK(s.train.size() == 7);
  CHECK(s.validation.size() == 1);
  CHECK(s.test.size() == 2);

  const auto s2 = split_dataset(records, {0.7, 0.1, 0.2}, 42);
  auto key = [](const InteractionRecord& r) {
    return r.user_id + "|" + r.item_id + "|" + std::to_string(r.timestamp);
  };
  REQUIRE(s.train.size() == s2.train.size());
  for (std::size_t i = 0; i < s.train.size(); ++i) {
    CHECK(key(s.train[i]) == key(s2.train[i]));
  }
}

TEST_CASE("split_dataset with different seeds differs on 100 records") {
  const auto records = make_synthetic_records(10, 20, 100, 3, 2);
  const auto a = split_dataset(records, {0.7, 0.1, 0.2}, 1);
  const auto b = split_dataset(records, {0.7, 0.1, 0.2}, 2);
  bool differs = false;
  for (std::size_t i = 0; i < a.train.size() && !differs; ++i) {
    differs = a.train[i].user_id != b.train[i].user_id ||
              a.train[i].item_id != b.train[i].item_id ||
              a.train[i].timestamp != b.train[i].timestamp;
  }
  CHECK(differs);
}

TEST_CASE("split_dataset validation errors") {
  const auto records = make_synthetic_records(3, 3, 5, 2, 3);
  CHECK_THROWS_AS(split_dataset(records, {0.5, 0.2, 0.2}, 0), Error);
  CHECK_THROWS_AS(split_dataset({records[0], records[1]}, {0.7, 0.1, 0.2}, 0),
                  Error);
}

TEST_CASE("split_dataset partitions the input multiset") {
  for (int trial = 0; trial < 20; ++trial) {
    const auto records = make_synthetic_records(8, 12, 53, 3, 50 + trial);
    const auto s = split_dataset(records, {0.7, 0.1, 0.2}, trial);
    auto key = [](const InteractionRecord& r) {
      return r.user_id + "|" + r.item_id + "|" + r.behavior + "|" +
             std::to_string(r.timestamp);
    };
    std::multiset<std::string> input, output;
    for (const auto& r : records) input.insert(key(r));
    for (const auto& r : s.train) output.insert(key(r));
    for (const auto& r : s.validation) output.insert(key(r));
    for (const auto& r : s.test) output.insert(key(r));
    CHECK(input == output);
  }
}

TEST_CASE("build_sequences orders by time and truncates to the most recent") {
  std::vector<InteractionRecord> records = {
      rec("u", "a", 1.0, 5), rec("u", "b", 1.0, 1), rec("u", "c", 1.0, 3)};
  const IdIndex index(records);
  const auto seqs = build_sequences(records, index, 10);
  REQUIRE(seqs.size() == 1);
  // b (t=1), c (t=3), a (t=5)
  CHECK(seqs[0].item_ids ==
        std::vector<int>{index.item_id("b"), index.item_id("c"),
                         index.item_id("a")});
}

TEST_CASE("build_sequences drops single-interaction users") {
  std::vector<InteractionRecord> records = {rec("u", "a", 1.0, 1)};
  const IdIndex index(records);
  CHECK(build_sequences(records, index, 5).empty());
}

TEST_CASE("build_sequences keeps the last max_seq_len items") {
  std::vector<InteractionRecord> records;
  for (int t = 0; t < 7; ++t) {
    records.push_back(rec("u", "i" + std::to_string(t), 1.0, t));
  }
  const IdIndex index(records);
  const auto seqs = build_sequences(records, index, 5);
  REQUIRE(seqs.size() == 1);
  REQUIRE(seqs[0].item_ids.size() == 5);
  for (int j = 0; j < 5; ++j) {
    CHECK(seqs[0].item_ids[j] == index.item_id("i" + std::to_string(j + 2)));
  }
}

TEST_CASE("build_sequences lengths and item containment") {
  for (int trial = 0; trial < 20; ++trial) {
    const auto records = make_synthetic_records(6, 10, 60, 3, 90 + trial);
    const IdIndex index(records);
    const auto seqs = build_sequences(records, index, 6);
    std::map<std::string, std::set<int>> interacted;
    for (const auto& r : records) {
      interacted[r.user_id].insert(index.item_id(r.item_id));
    }
    for (const auto& s : seqs) {
      CHECK(s.item_ids.size() >= 2);
      CHECK(s.item_ids.size() <= 6);
      for (int v : s.item_ids) CHECK(interacted.at(s.user_id).count(v) == 1);
    }
  }
}

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
#include <cmath>
#include <vector>

#include "sagittarius/gradcheck.hpp"
#include "sagittarius/synthetic.hpp"
#include "sagittarius/training.hpp"

using namespace sagittarius;
using Catch::Matchers::WithinAbs;

TEST_CASE("sample_negatives avoids interacted items") {
  const auto g = build_graph(make_synthetic_records(4, 10, 30, 3, 8));
  Rng rng(1);
  for (int u = 0; u < g.n_users; ++u) {
    if (g.user_degrees[u] >= g.n_items) continue;
    for (int w : sample_negatives(g, u, 200, rng)) {
      CHECK(w >= 0);
      CHECK(w < g.n_items);
      CHECK_FALSE(g.has_edge(u, w));
    }
  }
}

TEST_CASE("sample_negatives fails for saturated users") {
  std::vector<InteractionRecord> records = {{"u", "i1", "b", 0, 1.0},
                                            {"u", "i2", "b", 1, 1.0}};
  const auto g = build_graph(records);
  Rng rng(1);
  CHECK_THROWS_AS(sample_negatives(g, 0, 1, rng), Error);
}

TEST_CASE("sample_negatives is uniform over the unseen items") {
  // User 0 sees items 0 and 1; the other five items should each receive about
  // a fifth of the draws. Chi-square with 4 degrees of freedom; 25 is far in
  // the tail, so a failure indicates real bias rather than bad luck.
  std::vector<InteractionRecord> records = {{"u", "i0", "b", 0, 1.0},
                                            {"u", "i1", "b", 1, 1.0}};
  for (int v = 2; v < 7; ++v) {
    records.push_back({"x", "i" + std::to_string(v), "b", v, 1.0});
  }
  const auto g = build_graph(records);
  Rng rng(99);
  const int n = 100000;
  std::vector<int> counts(g.n_items, 0);
  for (int w : sample_negatives(g, 0, n, rng)) counts[w] += 1;
  CHECK(counts[0] == 0);
  CHECK(counts[1] == 0);
  const double expected = n / 5.0;
  double chi2 = 0.0;
  for (int v = 2; v < 7; ++v) {
    const double d = counts[v] - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < 25.0);
}

TEST_CASE("make_quadruples yields n_negatives per edge in edge order") {
  const auto g = build_graph(make_synthetic_records(4, 9, 25, 3, 12));
  Rng rng(3);
  const auto quads = make_quadruples(g, 3, rng);
  REQUIRE(quads.size() == g.edges.size() * 3);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    for (int j = 0; j < 3; ++j) {
      const auto& q = quads[e * 3 + j];
      CHECK(q.u == g.edges[e].u);
      CHECK(q.v == g.edges[e].v);
      CHECK(q.phi == g.edges[e].weight);
      CHECK_FALSE(g.has_edge(q.u, q.w));
    }
  }
}

TEST_CASE("bpr_loss unit values") {
  // Zero user embedding makes both scores zero: loss = phi * ln 2.
  Mat z_u = Mat::Zero(1, 2);
  Mat z_v = Mat::Ones(3, 2);
  Mat Q1 = Mat::Identity(2, 2);
  CHECK_THAT(bpr_loss({{0, 0, 1.0, 1}}, z_u, z_v, Q1),
             WithinAbs(std::log(2.0), 1e-12));
  CHECK_THAT(bpr_loss({{0, 0, 2.0, 1}}, z_u, z_v, Q1),
             WithinAbs(2.0 * std::log(2.0), 1e-12));
  CHECK_THROWS_AS(bpr_loss({}, z_u, z_v, Q1), Error);
}

TEST_CASE("bpr_loss saturates correctly at large margins") {
  Mat z_u = Mat::Ones(1, 1);
  Mat z_v(2, 1);
  Mat Q1 = Mat::Identity(1, 1);
  z_v << 50.0, 0.0;  // s = 50, sigmoid ~ 1
  CHECK(bpr_loss({{0, 0, 1.0, 1}}, z_u, z_v, Q1) < 1e-20);
  z_v << 0.0, 50.0;  // s = -50, -ln sigmoid ~ 50
  CHECK_THAT(bpr_loss({{0, 0, 1.0, 1}}, z_u, z_v, Q1), WithinAbs(50.0, 1e-12));
}

TEST_CASE("bpr_loss is linear in the behavior score") {
  const auto g = build_graph(make_synthetic_records(4, 8, 30, 3, 44));
  Hyperparams h;
  h.embed_dim = 4;
  h.final_dim = 3;
  const auto p = init_params(g, h);
  const auto emb = forward(g, p, h);
  Rng rng(5);
  auto quads = make_quadruples(g, 2, rng);
  const double base = bpr_loss(quads, emb.z_u, emb.z_v, p.Q1);
  for (auto& q : quads) q.phi *= 3.5;
  CHECK_THAT(bpr_loss(quads, emb.z_u, emb.z_v, p.Q1),
             WithinAbs(3.5 * base, 1e-9));
}

TEST_CASE("ctr_loss unit values") {
  Mat z_u = Mat::Zero(1, 2);
  Mat z_v = Mat::Ones(3, 2);
  Mat Q2 = Mat::Identity(2, 2);
  // Both logits zero: phi * ln 2 + ln 2.
  CHECK_THAT(ctr_loss({{0, 0, 1.0, 1}}, z_u, z_v, Q2),
             WithinAbs(2.0 * std::log(2.0), 1e-12));
  CHECK_THAT(ctr_loss({{0, 0, 3.0, 1}}, z_u, z_v, Q2),
             WithinAbs(4.0 * std::log(2.0), 1e-12));
  CHECK_THROWS_AS(ctr_loss({}, z_u, z_v, Q2), Error);
}

TEST_CASE("ctr_loss weights only the positive term") {
  Mat z_u = Mat::Ones(1, 1);
  Mat z_v(2, 1);
  z_v << 30.0, -30.0;  // confident positive, confident negative
  Mat Q2 = Mat::Identity(1, 1);
  CHECK(ctr_loss({{0, 0, 5.0, 1}}, z_u, z_v, Q2) < 1e-12);
  z_v << -30.0, 30.0;  // both confidently wrong: loss ~ 5*30 + 30
  CHECK_THAT(ctr_loss({{0, 0, 5.0, 1}}, z_u, z_v, Q2), WithinAbs(180.0, 1e-9));
}

TEST_CASE("seq_loss uniform predictor gives ln of the catalog size") {
  Mat z_v = Mat::Ones(4, 3);
  GruParams gru;
  gru.Wz = gru.Wr = gru.Wh = gru.Uz = gru.Ur = gru.Uh = Mat::Zero(3, 3);
  gru.bz = gru.br = gru.bh = Mat::Zero(3, 1);
  const Mat Ws = Mat::Zero(4, 3);
  std::vector<InteractionSequence> seqs = {{"u", {0, 1, 2}}};
  CHECK_THAT(seq_loss(seqs, z_v, gru, Ws), WithinAbs(std::log(4.0), 1e-12));
  CHECK(seq_loss({}, z_v, gru, Ws) == 0.0);
}

TEST_CASE("seq_loss matches the predictive distribution") {
  const auto g = build_graph(make_synthetic_records(4, 8, 40, 3, 70));
  Hyperparams h;
  h.embed_dim = 4;
  h.final_dim = 3;
  const auto p = init_params(g, h);
  const auto emb = forward(g, p, h);
  const auto records = make_synthetic_records(4, 8, 40, 3, 70);
  const auto seqs = build_sequences(records, g.index, 5);
  REQUIRE(seqs.size() >= 2);

  double expected = 0.0;
  for (const auto& s : seqs) {
    std::vector<Vec> inputs;
    for (std::size_t t = 0; t + 1 < s.item_ids.size(); ++t) {
      inputs.push_back(emb.z_v.row(s.item_ids[t]).transpose());
    }
    const Vec probs =
        next_item_distribution(gru_forward(inputs, p.gru), p.Ws);
    expected += -std::log(probs(s.item_ids.back()));
  }
  expected /= static_cast<double>(seqs.size());
  CHECK_THAT(seq_loss(seqs, emb.z_v, p.gru, p.Ws), WithinAbs(expected, 1e-9));
}

TEST_CASE("total_loss is the weighted sum") {
  CHECK_THAT(total_loss(0.9, 1.0, 1.1, 1.0, 1.0, 1.0), WithinAbs(3.0, 1e-15));
  CHECK_THAT(total_loss(2.0, 3.0, 4.0, 0.5, 0.0, 0.25), WithinAbs(2.0, 1e-15));
  Hyperparams h;
  h.lambda1 = 0.7;
  h.lambda2 = 1.3;
  h.lambda3 = 0.0;
  LossBreakdown lb{1.0, 2.0, 100.0};
  CHECK_THAT(lb.total(h), WithinAbs(0.7 + 2.6, 1e-12));
}

TEST_CASE("ranking decoder gradient matches its closed form") {
  const auto records = gradcheck_records();
  const auto g = build_graph(records);
  Hyperparams h;
  h.embed_dim = 5;
  h.final_dim = 4;
  h.n_layers = 1;
  h.lambda2 = 0.0;
  h.lambda3 = 0.0;
  const auto p = init_params(g, h);
  const auto emb = forward(g, p, h);

  const std::vector<TrainQuadruple> quads = {{0, 1, 3.0, 4}};
  const auto grads = compute_gradients(g, p, h, quads, {});

  const Vec zu = emb.z_u.row(0).transpose();
  const Vec diff = (emb.z_v.row(1) - emb.z_v.row(4)).transpose();
  const double s = zu.dot(p.Q1 * diff);
  const Mat expected = -3.0 * sigmoid(-s) * (zu * diff.transpose());
  CHECK(grads.Q1.isApprox(expected, 1e-10));
  CHECK(grads.Q2.isZero());
  CHECK(grads.Ws.isZero());
}

TEST_CASE("all-zero loss weights give all-zero gradients") {
  const auto records = gradcheck_records();
  const auto g = build_graph(records);
  Hyperparams h;
  h.embed_dim = 4;
  h.final_dim = 3;
  h.lambda1 = 0.0;
  h.lambda2 = 0.0;
  h.lambda3 = 0.0;
  const auto p = init_params(g, h);
  Rng rng(2);
  const auto quads = make_quadruples(g, 2, rng);
  const auto seqs = build_sequences(records, g.index, 4);
  LossBreakdown losses;
  const auto grads = compute_gradients(g, p, h, quads, seqs, &losses);
  grads.for_each_tensor([](const std::string& name, const Mat& m) {
    INFO(name);
    CHECK(m.isZero());
  });
  // The unweighted loss values are still reported.
  CHECK(losses.l1 > 0.0);
  CHECK(losses.l2 > 0.0);
  CHECK(losses.l3 > 0.0);
  CHECK(losses.total(h) == 0.0);
}

TEST_CASE("compute_gradients reports the same losses as compute_losses") {
  const auto records = gradcheck_records();
  const auto g = build_graph(records);
  Hyperparams h;
  h.embed_dim = 5;
  h.final_dim = 4;
  const auto p = init_params(g, h);
  Rng rng(7);
  const auto quads = make_quadruples(g, 2, rng);
  const auto seqs = build_sequences(records, g.index, 4);
  LossBreakdown from_grad;
  compute_gradients(g, p, h, quads, seqs, &from_grad);
  const LossBreakdown direct = compute_losses(g, p, h, quads, seqs);
  CHECK_THAT(from_grad.l1, WithinAbs(direct.l1, 1e-12));
  CHECK_THAT(from_grad.l2, WithinAbs(direct.l2, 1e-12));
  CHECK_THAT(from_grad.l3, WithinAbs(direct.l3, 1e-12));
}

TEST_CASE("gradient check passes on the default instance") {
  const auto report = run_default_gradcheck();
  CHECK(report.passed);
  CHECK(report.entries.size() == 17);
  for (const auto& e : report.entries) {
    INFO(e.tensor);
    CHECK(e.passed);
    CHECK(e.max_rel_err > 0.0);  // every tensor actually participates
  }
}

TEST_CASE("gradient check detects a corrupted tensor") {
  const auto report = run_default_gradcheck(1.0, 1.0, 1.0, 0, "gru.Ur");
  CHECK_FALSE(report.passed);
  int failed = 0;
  for (const auto& e : report.entries) {
    if (!e.passed) {
      ++failed;
      CHECK(e.tensor == "gru.Ur");
    }
  }
  CHECK(failed == 1);
  CHECK_THROWS_AS(run_default_gradcheck(1.0, 1.0, 1.0, 0, "nonsense"), Error);
}

namespace {

TrainState make_state(const BipartiteGraph& g, const Hyperparams& h) {
  TrainState state;
  state.params = init_params(g, h);
  state.adam_m = ModelParams::zeros_like(state.params);
  state.adam_v = ModelParams::zeros_like(state.params);
  return state;
}

}  // namespace

TEST_CASE("adam first step moves by about lr in the gradient sign") {
  const auto g = build_graph(make_synthetic_records(3, 5, 15, 2, 6));
  Hyperparams h;
  h.embed_dim = 3;
  h.final_dim = 2;
  TrainState state = make_state(g, h);
  const ModelParams before = state.params;

  ModelParams grads = ModelParams::zeros_like(state.params);
  grads.Q1(0, 0) = 0.37;
  grads.Q1(1, 1) = -4.2;
  adam_step(state, grads, 0.01);

  // m_hat / (sqrt(v_hat) + eps) = g / (|g| + eps) ~ sign(g) on step one.
  CHECK_THAT(state.params.Q1(0, 0) - before.Q1(0, 0), WithinAbs(-0.01, 1e-8));
  CHECK_THAT(state.params.Q1(1, 1) - before.Q1(1, 1), WithinAbs(0.01, 1e-8));
  CHECK(state.params.Q1(0, 1) == before.Q1(0, 1));
  CHECK(state.params.E_u == before.E_u);
  CHECK(state.step == 1);
}

TEST_CASE("adam rejects non-finite gradients") {
  const auto g = build_graph(make_synthetic_records(3, 5, 15, 2, 6));
  Hyperparams h;
  h.embed_dim = 3;
  h.final_dim = 2;
  TrainState state = make_state(g, h);
  ModelParams grads = ModelParams::zeros_like(state.params);
  grads.W2(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(state, grads, 0.01), Error);
}

TEST_CASE("fit is deterministic and decreases the training loss") {
  const auto records = make_synthetic_records(8, 12, 80, 3, 21);
  const auto split = split_dataset(records, {0.7, 0.1, 0.2}, 42);
  const IdIndex index(records);
  const auto g = build_graph(split.train, index);

  Hyperparams h;
  h.embed_dim = 6;
  h.final_dim = 5;
  h.n_negatives = 3;
  h.max_seq_len = 6;
  h.epochs = 6;
  h.patience = 6;
  h.seed = 9;

  const TrainState a = fit(g, split, h);
  const TrainState b = fit(g, split, h);
  REQUIRE(a.history.size() == b.history.size());
  REQUIRE(a.history.size() >= 5);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].total == b.history[i].total);
    CHECK(a.history[i].val_urecall == b.history[i].val_urecall);
  }
  CHECK(a.best_params.E_u == b.best_params.E_u);
  CHECK(a.best_params.Q1 == b.best_params.Q1);
  CHECK(a.history[4].total < a.history[0].total);
  CHECK(a.best_epoch >= 1);
}

TEST_CASE("fit honors early stopping patience") {
  const auto records = make_synthetic_records(6, 10, 60, 3, 33);
  const auto split = split_dataset(records, {0.7, 0.1, 0.2}, 1);
  const IdIndex index(records);
  const auto g = build_graph(split.train, index);

  Hyperparams h;
  h.embed_dim = 4;
  h.final_dim = 3;
  h.epochs = 100;
  h.patience = 2;
  const TrainState state = fit(g, split, h);
  CHECK(state.history.size() < 100);
  CHECK(static_cast<int>(state.history.size()) <= state.best_epoch + 2);
}

TEST_CASE("mini-batched fit matches full batch loss accounting") {
  const auto records = make_synthetic_records(6, 10, 50, 3, 55);
  const auto split = split_dataset(records, {0.7, 0.1, 0.2}, 2);
  const IdIndex index(records);
  const auto g = build_graph(split.train, index);

  Hyperparams h;
  h.embed_dim = 4;
  h.final_dim = 3;
  h.epochs = 3;
  h.patience = 3;
  h.batch_quads = 16;
  const TrainState state = fit(g, split, h);
  REQUIRE(!state.history.empty());
  for (const auto& s : state.history) {
    CHECK(std::isfinite(s.total));
    CHECK(s.l1 >= 0.0);
    CHECK(s.l2 >= 0.0);
    CHECK(s.l3 >= 0.0);
  }
  CHECK(state.best_params.all_finite());
}

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
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sagittarius/common.hpp"
#include "sagittarius/data.hpp"
#include "sagittarius/eval.hpp"
#include "sagittarius/model.hpp"

namespace sagittarius {

// Positive training edge (u, v) with its behavior score and one sampled
// negative item w the user never interacted with.
struct TrainQuadruple {
  int u;
  int v;
  double phi;
  int w;
};

// Uniform draws (with replacement) from the items user u has no training
// edge to.
inline std::vector<int> sample_negatives(const BipartiteGraph& graph, int u,
                                         int n, Rng& rng) {
  if (graph.user_degrees[u] >= graph.n_items) {
    fail("data", "sample_negatives: user " + std::to_string(u) +
                     " interacted with every item");
  }
  std::vector<int> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    int w;
    do {
      w = static_cast<int>(uniform_index(rng, graph.n_items));
    } while (graph.has_edge(u, w));
    out.push_back(w);
  }
  return out;
}

// One negative-set per positive edge; |O| = n_negatives * |edges|. The same
// quadruples feed both the ranking and the click-through losses.
inline std::vector<TrainQuadruple> make_quadruples(const BipartiteGraph& graph,
                                                   int n_negatives, Rng& rng) {
  std::vector<TrainQuadruple> quads;
  quads.reserve(graph.edges.size() * static_cast<std::size_t>(n_negatives));
  for (const auto& edge : graph.edges) {
    for (int w : sample_negatives(graph, edge.u, n_negatives, rng)) {
      quads.push_back({edge.u, edge.v, edge.weight, w});
    }
  }
  return quads;
}

// Behavior-weighted BPR over quadruples:
// -(1/|O|) sum phi * ln sigmoid(g1(u,v) - g1(u,w)).
inline double bpr_loss(const std::vector<TrainQuadruple>& quads, const Mat& z_u,
                       const Mat& z_v, const Mat& Q1) {
  if (quads.empty()) fail("usage", "bpr_loss: empty quadruple set");
  double loss = 0.0;
  for (const auto& q : quads) {
    const double s = affinity(z_u.row(q.u).transpose(), z_v.row(q.v).transpose(), Q1) -
                     affinity(z_u.row(q.u).transpose(), z_v.row(q.w).transpose(), Q1);
    loss += q.phi * softplus(-s);  // -ln sigmoid(s)
  }
  return loss / static_cast<double>(quads.size());
}

// Binary cross entropy on the click-through decoder; the positive term is
// weighted by phi, the negative term by 1.
inline double ctr_loss(const std::vector<TrainQuadruple>& quads, const Mat& z_u,
                       const Mat& z_v, const Mat& Q2) {
  if (quads.empty()) fail("usage", "ctr_loss: empty quadruple set");
  double loss = 0.0;
  for (const auto& q : quads) {
    const double a = ctr_logit(z_u.row(q.u).transpose(), z_v.row(q.v).transpose(), Q2);
    const double b = ctr_logit(z_u.row(q.u).transpose(), z_v.row(q.w).transpose(), Q2);
    loss += q.phi * softplus(-a) + softplus(b);
  }
  return loss / static_cast<double>(quads.size());
}

// Mean negative log likelihood of each sequence's last item under the GRU
// next-item predictor.
inline double seq_loss(const std::vector<InteractionSequence>& sequences,
                       const Mat& z_v, const GruParams& gru, const Mat& Ws) {
  if (sequences.empty()) return 0.0;
  double loss = 0.0;
  for (const auto& seq : sequences) {
    std::vector<Vec> inputs;
    inputs.reserve(seq.item_ids.size() - 1);
    for (std::size_t t = 0; t + 1 < seq.item_ids.size(); ++t) {
      inputs.push_back(z_v.row(seq.item_ids[t]).transpose());
    }
    const Vec q = gru_forward(inputs, gru);
    const Vec logits = Ws * q;
    loss += log_sum_exp(logits) - logits(seq.item_ids.back());
  }
  return loss / static_cast<double>(sequences.size());
}

inline double total_loss(double l1, double l2, double l3, double lambda1,
                         double lambda2, double lambda3) {
  return lambda1 * l1 + lambda2 * l2 + lambda3 * l3;
}

struct LossBreakdown {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;

  double total(const Hyperparams& h) const {
    return total_loss(l1, l2, l3, h.lambda1, h.lambda2, h.lambda3);
  }
};

// Forward pass plus loss values only; the numerical-differentiation route.
inline LossBreakdown compute_losses(
    const BipartiteGraph& graph, const ModelParams& params,
    const Hyperparams& hyper, const std::vector<TrainQuadruple>& quads,
    const std::vector<InteractionSequence>& sequences) {
  const NodeEmbeddings emb = forward(graph, params, hyper);
  LossBreakdown out;
  if (!quads.empty()) {
    out.l1 = bpr_loss(quads, emb.z_u, emb.z_v, params.Q1);
    out.l2 = ctr_loss(quads, emb.z_u, emb.z_v, params.Q2);
  }
  out.l3 = seq_loss(sequences, emb.z_v, params.gru, params.Ws);
  return out;
}

namespace detail {

// BPTT through one traced GRU run. dq is the gradient at the final hidden
// state; per-step input gradients are added to dZv rows.
inline void gru_backward(const GruParams& gru, const GruTrace& trace, Vec dh,
                         const std::vector<int>& input_items, Mat& dZv,
                         GruParams& g) {
  const Eigen::Index d = gru.Wz.rows();
  const Vec ones = Vec::Ones(d);
  for (int t = static_cast<int>(trace.x.size()) - 1; t >= 0; --t) {
    const Vec& x = trace.x[t];
    const Vec h_prev = t > 0 ? trace.h[t - 1] : Vec::Zero(d);
    const Vec& zt = trace.z[t];
    const Vec& rt = trace.r[t];
    const Vec& hhat = trace.hhat[t];

    const Vec dz = dh.cwiseProduct(hhat - h_prev);
    const Vec dhhat = dh.cwiseProduct(zt);
    Vec dh_prev = dh.cwiseProduct(ones - zt);

    const Vec dah = dhhat.cwiseProduct(ones - hhat.cwiseProduct(hhat));
    g.Wh += dah * x.transpose();
    g.Uh += dah * rt.cwiseProduct(h_prev).transpose();
    g.bh.col(0) += dah;
    const Vec drh = gru.Uh.transpose() * dah;
    const Vec dr = drh.cwiseProduct(h_prev);
    dh_prev += drh.cwiseProduct(rt);

    const Vec daz = dz.cwiseProduct(zt).cwiseProduct(ones - zt);
    g.Wz += daz * x.transpose();
    g.Uz += daz * h_prev.transpose();
    g.bz.col(0) += daz;
    dh_prev += gru.Uz.transpose() * daz;

    const Vec dar = dr.cwiseProduct(rt).cwiseProduct(ones - rt);
    g.Wr += dar * x.transpose();
    g.Ur += dar * h_prev.transpose();
    g.br.col(0) += dar;
    dh_prev += gru.Ur.transpose() * dar;

    const Vec dx = gru.Wz.transpose() * daz + gru.Wr.transpose() * dar +
                   gru.Wh.transpose() * dah;
    dZv.row(input_items[t]) += dx.transpose();
    dh = std::move(dh_prev);
  }
}

}  // namespace detail

// Exact gradient of the weighted total loss with respect to every parameter,
// including the paths through the per-edge cosine scale and through the item
// embeddings feeding the GRU.
inline ModelParams compute_gradients(
    const BipartiteGraph& graph, const ModelParams& params,
    const Hyperparams& hyper, const std::vector<TrainQuadruple>& quads,
    const std::vector<InteractionSequence>& sequences,
    LossBreakdown* losses_out = nullptr) {
  const NodeEmbeddings emb = forward(graph, params, hyper);
  const Eigen::Index db = hyper.embed_dim;
  const Eigen::Index d = hyper.final_dim;
  const int L = hyper.n_layers;

  ModelParams g = ModelParams::zeros_like(params);
  Mat dZu = Mat::Zero(graph.n_users, d);
  Mat dZv = Mat::Zero(graph.n_items, d);
  LossBreakdown losses;

  if (!quads.empty()) {
    // Row u of P1u is (Q1^T z_u)^T, so g1(u,v) = P1u.row(u) . z_v; row v of
    // P1v is (Q1 z_v)^T. Same layout for the Q2 decoder.
    const Mat P1u = emb.z_u * params.Q1;
    const Mat P1v = emb.z_v * params.Q1.transpose();
    const Mat P2u = emb.z_u * params.Q2;
    const Mat P2v = emb.z_v * params.Q2.transpose();
    Mat S1 = Mat::Zero(graph.n_users, d);  // gQ1 = Zu^T S1
    Mat S2 = Mat::Zero(graph.n_users, d);
    const double inv_o = 1.0 / static_cast<double>(quads.size());

    for (const auto& q : quads) {
      const double s =
          P1u.row(q.u).dot(emb.z_v.row(q.v)) - P1u.row(q.u).dot(emb.z_v.row(q.w));
      losses.l1 += q.phi * softplus(-s) * inv_o;
      if (hyper.lambda1 > 0.0) {
        const double coef = -(hyper.lambda1 * q.phi * inv_o) * sigmoid(-s);
        dZu.row(q.u) += coef * (P1v.row(q.v) - P1v.row(q.w));
        dZv.row(q.v) += coef * P1u.row(q.u);
        dZv.row(q.w) -= coef * P1u.row(q.u);
        S1.row(q.u) += coef * (emb.z_v.row(q.v) - emb.z_v.row(q.w));
      }

      const double a = P2u.row(q.u).dot(emb.z_v.row(q.v));
      const double b = P2u.row(q.u).dot(emb.z_v.row(q.w));
      losses.l2 += (q.phi * softplus(-a) + softplus(b)) * inv_o;
      if (hyper.lambda2 > 0.0) {
        const double ca = -(hyper.lambda2 * q.phi * inv_o) * sigmoid(-a);
        const double cb = (hyper.lambda2 * inv_o) * sigmoid(b);
        dZu.row(q.u) += ca * P2v.row(q.v) + cb * P2v.row(q.w);
        dZv.row(q.v) += ca * P2u.row(q.u);
        dZv.row(q.w) += cb * P2u.row(q.u);
        S2.row(q.u) += ca * emb.z_v.row(q.v) + cb * emb.z_v.row(q.w);
      }
    }
    if (hyper.lambda1 > 0.0) g.Q1 = emb.z_u.transpose() * S1;
    if (hyper.lambda2 > 0.0) g.Q2 = emb.z_u.transpose() * S2;
  }

  if (!sequences.empty()) {
    const double inv_s = 1.0 / static_cast<double>(sequences.size());
    for (const auto& seq : sequences) {
      std::vector<Vec> inputs;
      std::vector<int> input_items(seq.item_ids.begin(), seq.item_ids.end() - 1);
      inputs.reserve(input_items.size());
      for (int v : input_items) inputs.push_back(emb.z_v.row(v).transpose());

      GruTrace trace;
      const Vec q = gru_forward(inputs, params.gru, &trace);
      const Vec logits = params.Ws * q;
      const int target = seq.item_ids.back();
      losses.l3 += (log_sum_exp(logits) - logits(target)) * inv_s;
      if (hyper.lambda3 > 0.0) {
        Vec glogits = stable_softmax(logits);
        glogits(target) -= 1.0;
        glogits *= hyper.lambda3 * inv_s;
        g.Ws += glogits * q.transpose();
        const Vec dq = params.Ws.transpose() * glogits;
        detail::gru_backward(params.gru, trace, dq, input_items, dZv, g.gru);
      }
    }
  }

  // Combination layer: z = h_cat W2^T.
  g.W2 = dZu.transpose() * emb.h_u + dZv.transpose() * emb.h_v;
  const Mat dHu = dZu * params.W2;
  const Mat dHv = dZv * params.W2;

  // Initial per-layer gradients come from the concatenation split; deeper
  // layers then add their contribution to the layer below.
  std::vector<Mat> dEu(L + 1), dEv(L + 1);
  for (int l = 1; l <= L; ++l) {
    dEu[l] = dHu.middleCols(static_cast<Eigen::Index>(l - 1) * db, db);
    dEv[l] = dHv.middleCols(static_cast<Eigen::Index>(l - 1) * db, db);
  }

  for (int l = L; l >= 1; --l) {
    const Mat& eu_prev = emb.e_u[l - 1];
    const Mat& ev_prev = emb.e_v[l - 1];
    const LayerTrace& tr = emb.layers[l - 1];

    const Mat dpre_u =
        (emb.e_u[l].array() > 0.0).select(dEu[l], Mat::Zero(dEu[l].rows(), db));
    const Mat dpre_v =
        (emb.e_v[l].array() > 0.0).select(dEv[l], Mat::Zero(dEv[l].rows(), db));

    Mat h_u(graph.n_users, 2 * db);
    h_u << eu_prev, tr.agg_u;
    Mat h_v(graph.n_items, 2 * db);
    h_v << ev_prev, tr.agg_v;
    g.W1[l - 1] += dpre_u.transpose() * h_u + dpre_v.transpose() * h_v;

    const Mat dh_u = dpre_u * params.W1[l - 1];
    const Mat dh_v = dpre_v * params.W1[l - 1];
    Mat deu_prev = dh_u.leftCols(db);
    const Mat dagg_u = dh_u.rightCols(db);
    Mat dev_prev = dh_v.leftCols(db);
    const Mat dagg_v = dh_v.rightCols(db);

    const Vec norms_u = eu_prev.rowwise().norm().cwiseMax(kCosineNormFloor);
    const Vec norms_v = ev_prev.rowwise().norm().cwiseMax(kCosineNormFloor);
    const Vec raw_norms_u = eu_prev.rowwise().norm();
    const Vec raw_norms_v = ev_prev.rowwise().norm();

    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
      const auto& edge = graph.edges[e];
      const double c = tr.edge_scale[e];
      // Message terms: agg_u[u] += c * ev_prev[v] and symmetrically.
      const double dc =
          dagg_u.row(edge.u).dot(ev_prev.row(edge.v)) +
          dagg_v.row(edge.v).dot(eu_prev.row(edge.u));
      dev_prev.row(edge.v) += c * dagg_u.row(edge.u);
      deu_prev.row(edge.u) += c * dagg_v.row(edge.v);
      if (dc == 0.0) continue;

      // Cosine path of c_uv; the norm factors are constants when a vector
      // sits at the epsilon floor.
      const double k =
          std::sqrt(edge.weight /
                    (static_cast<double>(graph.user_degrees[edge.u]) *
                     graph.item_degrees[edge.v]));
      const double na = norms_u(edge.u);
      const double nb = norms_v(edge.v);
      const double dot = eu_prev.row(edge.u).dot(ev_prev.row(edge.v));
      const double s = dc * k;
      Eigen::RowVectorXd dcos_da = ev_prev.row(edge.v) / (na * nb);
      if (raw_norms_u(edge.u) > kCosineNormFloor) {
        dcos_da -= (dot / (na * na * na * nb)) * eu_prev.row(edge.u);
      }
      Eigen::RowVectorXd dcos_db = eu_prev.row(edge.u) / (na * nb);
      if (raw_norms_v(edge.v) > kCosineNormFloor) {
        dcos_db -= (dot / (na * nb * nb * nb)) * ev_prev.row(edge.v);
      }
      deu_prev.row(edge.u) += s * dcos_da;
      dev_prev.row(edge.v) += s * dcos_db;
    }

    if (l - 1 >= 1) {
      dEu[l - 1] += deu_prev;
      dEv[l - 1] += dev_prev;
    } else {
      g.E_u = deu_prev;
      g.E_v = dev_prev;
    }
  }

  if (losses_out != nullptr) *losses_out = losses;
  return g;
}

struct EpochStats {
  int epoch = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double total = 0.0;
  double val_urecall = 0.0;  // negative when validation is unusable
};

struct TrainState {
  ModelParams params;
  ModelParams adam_m;
  ModelParams adam_v;
  long step = 0;
  Rng rng;
  std::vector<EpochStats> history;

  ModelParams best_params;
  double best_val_urecall = -1.0;
  int best_epoch = -1;
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

inline void adam_step(TrainState& state, const ModelParams& grads, double lr) {
  grads.for_each_tensor([](const std::string& name, const Mat& m) {
    if (!m.allFinite()) fail("numeric", "non-finite gradient in " + name);
  });
  state.step += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));

  std::vector<Mat*> p, gm, m, v;
  state.params.for_each_tensor([&](const std::string&, Mat& t) { p.push_back(&t); });
  const_cast<ModelParams&>(grads).for_each_tensor(
      [&](const std::string&, Mat& t) { gm.push_back(&t); });
  state.adam_m.for_each_tensor([&](const std::string&, Mat& t) { m.push_back(&t); });
  state.adam_v.for_each_tensor([&](const std::string&, Mat& t) { v.push_back(&t); });

  for (std::size_t i = 0; i < p.size(); ++i) {
    *m[i] = kAdamBeta1 * *m[i] + (1.0 - kAdamBeta1) * *gm[i];
    *v[i] = kAdamBeta2 * *v[i] + (1.0 - kAdamBeta2) * gm[i]->cwiseProduct(*gm[i]);
    const Mat m_hat = *m[i] / bc1;
    const Mat v_hat = *v[i] / bc2;
    *p[i] -= lr * (m_hat.array() / (v_hat.array().sqrt() + kAdamEps)).matrix();
  }
  if (!state.params.all_finite()) {
    fail("numeric", "non-finite parameter after optimizer step");
  }
}

using EpochCallback = std::function<void(const EpochStats&)>;

// Full training loop: per epoch resample negatives, take one (or several,
// when batch_quads > 0) Adam steps on the weighted total loss, evaluate
// URecall@10 on the validation split, and keep the best-validation
// parameters. Stops early after `patience` epochs without improvement.
inline TrainState fit(const BipartiteGraph& graph, const DatasetSplit& split,
                      const Hyperparams& hyper,
                      const EpochCallback& on_epoch = nullptr) {
  hyper.validate();
  if (split.train.empty()) fail("data", "fit: empty training split");

  TrainState state;
  state.params = init_params(graph, hyper);
  state.adam_m = ModelParams::zeros_like(state.params);
  state.adam_v = ModelParams::zeros_like(state.params);
  state.rng = Rng(hyper.seed + 0x9e3779b97f4a7c15ULL);
  state.best_params = state.params;

  const auto sequences =
      build_sequences(split.train, graph.index, hyper.max_seq_len);

  int since_best = 0;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    auto quads = make_quadruples(graph, hyper.n_negatives, state.rng);

    EpochStats stats;
    stats.epoch = epoch;
    if (hyper.batch_quads <= 0 ||
        quads.size() <= static_cast<std::size_t>(hyper.batch_quads)) {
      LossBreakdown losses;
      const ModelParams grads = compute_gradients(graph, state.params, hyper,
                                                  quads, sequences, &losses);
      adam_step(state, grads, hyper.learning_rate);
      stats.l1 = losses.l1;
      stats.l2 = losses.l2;
      stats.l3 = losses.l3;
    } else {
      // Mini-batching over quadruples with a fixed shuffle; sequences are
      // chunked alongside so every step sees both objectives.
      for (std::size_t i = quads.size() - 1; i > 0; --i) {
        std::swap(quads[i], quads[uniform_index(state.rng, i + 1)]);
      }
      const std::size_t n_batches =
          (quads.size() + hyper.batch_quads - 1) / hyper.batch_quads;
      double wl1 = 0.0, wl2 = 0.0, wl3 = 0.0;
      std::size_t seq_done = 0;
      for (std::size_t b = 0; b < n_batches; ++b) {
        const std::size_t qlo = b * hyper.batch_quads;
        const std::size_t qhi = std::min(quads.size(), qlo + hyper.batch_quads);
        std::vector<TrainQuadruple> batch(quads.begin() + qlo,
                                          quads.begin() + qhi);
        const std::size_t shi = sequences.size() * (b + 1) / n_batches;
        std::vector<InteractionSequence> seq_batch(
            sequences.begin() + seq_done, sequences.begin() + shi);
        seq_done = shi;

        LossBreakdown losses;
        const ModelParams grads = compute_gradients(graph, state.params, hyper,
                                                    batch, seq_batch, &losses);
        adam_step(state, grads, hyper.learning_rate);
        wl1 += losses.l1 * static_cast<double>(batch.size());
        wl2 += losses.l2 * static_cast<double>(batch.size());
        wl3 += losses.l3 * static_cast<double>(seq_batch.size());
      }
      stats.l1 = wl1 / static_cast<double>(quads.size());
      stats.l2 = wl2 / static_cast<double>(quads.size());
      stats.l3 = sequences.empty() ? 0.0 : wl3 / static_cast<double>(sequences.size());
    }
    stats.total =
        total_loss(stats.l1, stats.l2, stats.l3, hyper.lambda1, hyper.lambda2,
                   hyper.lambda3);

    bool have_val = false;
    try {
      const MetricsReport val = evaluate(graph, state.params, hyper,
                                         split.validation, 10);
      stats.val_urecall = val.urecall;
      have_val = true;
    } catch (const Error&) {
      stats.val_urecall = -1.0;  // no evaluable validation users
    }

    if (!have_val || stats.val_urecall > state.best_val_urecall) {
      state.best_val_urecall = stats.val_urecall;
      state.best_params = state.params;
      state.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }

    state.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (since_best >= hyper.patience) break;
  }
  return state;
}

}  // namespace sagittarius

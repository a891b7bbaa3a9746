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

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sagittarius/common.hpp"
#include "sagittarius/data.hpp"

namespace sagittarius {

struct Hyperparams {
  int embed_dim = 64;   // per-layer convolution width
  int final_dim = 64;   // combined embedding width
  int n_layers = 2;
  double lambda1 = 1.0;  // ranking objective
  double lambda2 = 1.0;  // click-through objective
  double lambda3 = 1.0;  // sequence objective
  int n_negatives = 10;
  double learning_rate = 0.01;
  int max_seq_len = 50;
  int epochs = 150;
  int patience = 10;       // early-stopping patience in epochs
  int batch_quads = 0;     // 0 = full batch; otherwise quadruples per step
  std::uint64_t seed = 0;

  void validate() const {
    if (embed_dim < 1) fail("config", "embed_dim must be >= 1");
    if (final_dim < 1) fail("config", "final_dim must be >= 1");
    if (n_layers < 1) fail("config", "n_layers must be >= 1");
    if (n_negatives < 1) fail("config", "n_negatives must be >= 1");
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0) {
      fail("config", "loss weights must be non-negative");
    }
    if (max_seq_len < 2) fail("config", "max_seq_len must be >= 2");
    if (epochs < 1) fail("config", "epochs must be >= 1");
    if (!(learning_rate > 0.0)) fail("config", "learning_rate must be > 0");
  }
};

struct GruParams {
  Mat Wz, Wr, Wh;  // input weights, d x d
  Mat Uz, Ur, Uh;  // hidden weights, d x d
  Mat bz, br, bh;  // biases, d x 1
};

// Every learnable tensor of the model. User-side and item-side convolutions
// share W1 per layer and share W2.
struct ModelParams {
  Mat E_u;                 // |U| x embed_dim
  Mat E_v;                 // |V| x embed_dim
  std::vector<Mat> W1;     // n_layers of embed_dim x 2*embed_dim
  Mat W2;                  // final_dim x (n_layers * embed_dim)
  Mat Q1;                  // final_dim x final_dim, ranking decoder
  Mat Q2;                  // final_dim x final_dim, click-through decoder
  GruParams gru;
  Mat Ws;                  // |V| x final_dim, next-item projection

  template <typename F>
  void for_each_tensor(F&& f) {
    f("E_u", E_u);
    f("E_v", E_v);
    for (std::size_t l = 0; l < W1.size(); ++l) {
      f("W1[" + std::to_string(l) + "]", W1[l]);
    }
    f("W2", W2);
    f("Q1", Q1);
    f("Q2", Q2);
    f("gru.Wz", gru.Wz);
    f("gru.Wr", gru.Wr);
    f("gru.Wh", gru.Wh);
    f("gru.Uz", gru.Uz);
    f("gru.Ur", gru.Ur);
    f("gru.Uh", gru.Uh);
    f("gru.bz", gru.bz);
    f("gru.br", gru.br);
    f("gru.bh", gru.bh);
    f("Ws", Ws);
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_tensor(
        [&](const std::string& name, Mat& m) { f(name, const_cast<const Mat&>(m)); });
  }

  static ModelParams zeros_like(const ModelParams& other) {
    ModelParams g = other;
    g.for_each_tensor([](const std::string&, Mat& m) { m.setZero(); });
    return g;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](const std::string&, const Mat& m) {
      if (!m.allFinite()) ok = false;
    });
    return ok;
  }
};

inline ModelParams init_params(const BipartiteGraph& graph,
                               const Hyperparams& hyper) {
  hyper.validate();
  const int db = hyper.embed_dim;
  const int d = hyper.final_dim;
  const int L = hyper.n_layers;

  ModelParams p;
  p.E_u.resize(graph.n_users, db);
  p.E_v.resize(graph.n_items, db);
  p.W1.assign(L, Mat(db, 2 * db));
  p.W2.resize(d, L * db);
  p.Q1.resize(d, d);
  p.Q2.resize(d, d);
  p.gru.Wz.resize(d, d);
  p.gru.Wr.resize(d, d);
  p.gru.Wh.resize(d, d);
  p.gru.Uz.resize(d, d);
  p.gru.Ur.resize(d, d);
  p.gru.Uh.resize(d, d);
  p.gru.bz = Mat::Zero(d, 1);
  p.gru.br = Mat::Zero(d, 1);
  p.gru.bh = Mat::Zero(d, 1);
  p.Ws.resize(graph.n_items, d);

  // Glorot-uniform: bound sqrt(6 / (rows + cols)) per matrix; biases stay
  // zero. Fill order is the tensor enumeration order, fixed for determinism.
  Rng rng(hyper.seed);
  p.for_each_tensor([&](const std::string& name, Mat& m) {
    if (name.rfind("gru.b", 0) == 0) return;
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        m(i, j) = uniform_real(rng, -a, a);
      }
    }
  });
  return p;
}

constexpr double kCosineNormFloor = 1e-12;

// Degree- and behavior-normalized cosine coefficient of one message (the
// per-edge scale of the convolution).
inline double scaling_factor(const Eigen::Ref<const Vec>& e_u,
                             const Eigen::Ref<const Vec>& e_v, int deg_u,
                             int deg_v, double phi) {
  const double na = std::max(e_u.norm(), kCosineNormFloor);
  const double nb = std::max(e_v.norm(), kCosineNormFloor);
  const double cosine = e_u.dot(e_v) / (na * nb);
  return std::sqrt(phi / (static_cast<double>(deg_u) * deg_v)) * cosine;
}

// Per-layer forward intermediates kept for the backward pass.
struct LayerTrace {
  std::vector<double> edge_scale;  // c_uv per graph edge
  Mat agg_u;  // |U| x embed_dim, sum of scaled item messages
  Mat agg_v;  // |V| x embed_dim, sum of scaled user messages
};

// Synchronous bipartite convolution: both sides read only previous-layer
// embeddings. Returns post-ReLU embeddings; fills `trace` when given.
inline std::pair<Mat, Mat> convolve_layer(const BipartiteGraph& graph,
                                          const Mat& e_u_prev,
                                          const Mat& e_v_prev, const Mat& W1_l,
                                          LayerTrace* trace = nullptr) {
  const Eigen::Index db = e_u_prev.cols();
  if (e_v_prev.cols() != db || W1_l.rows() != db || W1_l.cols() != 2 * db) {
    fail("numeric", "convolve_layer: inconsistent shapes");
  }

  Vec norms_u = e_u_prev.rowwise().norm().cwiseMax(kCosineNormFloor);
  Vec norms_v = e_v_prev.rowwise().norm().cwiseMax(kCosineNormFloor);

  Mat agg_u = Mat::Zero(e_u_prev.rows(), db);
  Mat agg_v = Mat::Zero(e_v_prev.rows(), db);
  std::vector<double> scales(graph.edges.size());
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    const double cosine = e_u_prev.row(edge.u).dot(e_v_prev.row(edge.v)) /
                          (norms_u(edge.u) * norms_v(edge.v));
    const double c =
        std::sqrt(edge.weight / (static_cast<double>(graph.user_degrees[edge.u]) *
                                 graph.item_degrees[edge.v])) *
        cosine;
    scales[e] = c;
    agg_u.row(edge.u) += c * e_v_prev.row(edge.v);
    agg_v.row(edge.v) += c * e_u_prev.row(edge.u);
  }

  // h = [self || aggregate]; next = ReLU(h W1^T) row-wise.
  Mat h_u(e_u_prev.rows(), 2 * db);
  h_u << e_u_prev, agg_u;
  Mat h_v(e_v_prev.rows(), 2 * db);
  h_v << e_v_prev, agg_v;
  Mat e_u_next = (h_u * W1_l.transpose()).cwiseMax(0.0);
  Mat e_v_next = (h_v * W1_l.transpose()).cwiseMax(0.0);

  if (trace != nullptr) {
    trace->edge_scale = std::move(scales);
    trace->agg_u = std::move(agg_u);
    trace->agg_v = std::move(agg_v);
  }
  return {std::move(e_u_next), std::move(e_v_next)};
}

// Concatenate layers 1..L (layer 0 excluded) and map to the final dimension.
inline std::pair<Mat, Mat> combine_layers(const std::vector<Mat>& per_layer_u,
                                          const std::vector<Mat>& per_layer_v,
                                          const Mat& W2) {
  if (per_layer_u.empty() || per_layer_u.size() != per_layer_v.size()) {
    fail("numeric", "combine_layers: layer-count mismatch");
  }
  const Eigen::Index db = per_layer_u[0].cols();
  if (W2.cols() != static_cast<Eigen::Index>(per_layer_u.size()) * db) {
    fail("numeric", "combine_layers: W2 width does not match L * embed_dim");
  }
  Mat h_u(per_layer_u[0].rows(), W2.cols());
  Mat h_v(per_layer_v[0].rows(), W2.cols());
  for (std::size_t l = 0; l < per_layer_u.size(); ++l) {
    h_u.middleCols(static_cast<Eigen::Index>(l) * db, db) = per_layer_u[l];
    h_v.middleCols(static_cast<Eigen::Index>(l) * db, db) = per_layer_v[l];
  }
  return {h_u * W2.transpose(), h_v * W2.transpose()};
}

// Full forward pass with every intermediate retained for backprop.
struct NodeEmbeddings {
  std::vector<Mat> e_u;  // layers 0..L, |U| x embed_dim each
  std::vector<Mat> e_v;  // layers 0..L
  std::vector<LayerTrace> layers;  // per convolution layer 1..L
  Mat h_u;  // |U| x (L * embed_dim), concatenation of layers 1..L
  Mat h_v;
  Mat z_u;  // |U| x final_dim
  Mat z_v;  // |V| x final_dim
};

inline NodeEmbeddings forward(const BipartiteGraph& graph,
                              const ModelParams& params,
                              const Hyperparams& hyper) {
  NodeEmbeddings out;
  const int L = hyper.n_layers;
  out.e_u.reserve(L + 1);
  out.e_v.reserve(L + 1);
  out.e_u.push_back(params.E_u);
  out.e_v.push_back(params.E_v);
  out.layers.resize(L);
  for (int l = 0; l < L; ++l) {
    auto [eu, ev] = convolve_layer(graph, out.e_u.back(), out.e_v.back(),
                                   params.W1[l], &out.layers[l]);
    out.e_u.push_back(std::move(eu));
    out.e_v.push_back(std::move(ev));
  }
  std::vector<Mat> layers_u(out.e_u.begin() + 1, out.e_u.end());
  std::vector<Mat> layers_v(out.e_v.begin() + 1, out.e_v.end());
  const Eigen::Index db = hyper.embed_dim;
  out.h_u.resize(graph.n_users, L * db);
  out.h_v.resize(graph.n_items, L * db);
  for (int l = 0; l < L; ++l) {
    out.h_u.middleCols(l * db, db) = layers_u[l];
    out.h_v.middleCols(l * db, db) = layers_v[l];
  }
  auto [zu, zv] = combine_layers(layers_u, layers_v, params.W2);
  out.z_u = std::move(zu);
  out.z_v = std::move(zv);
  return out;
}

// Bilinear ranking score z_u^T Q1 z_v.
inline double affinity(const Eigen::Ref<const Vec>& z_u,
                       const Eigen::Ref<const Vec>& z_v, const Mat& Q1) {
  return z_u.dot(Q1 * z_v);
}

// Bilinear click-through logit z_u^T Q2 z_v.
inline double ctr_logit(const Eigen::Ref<const Vec>& z_u,
                        const Eigen::Ref<const Vec>& z_v, const Mat& Q2) {
  return z_u.dot(Q2 * z_v);
}

// Per-step activations of one GRU run, kept for BPTT.
struct GruTrace {
  std::vector<Vec> x;      // inputs
  std::vector<Vec> z;      // update gates
  std::vector<Vec> r;      // reset gates
  std::vector<Vec> hhat;   // candidates
  std::vector<Vec> h;      // hidden states (h[t] after step t)
};

inline Vec gru_forward(const std::vector<Vec>& inputs, const GruParams& gru,
                       GruTrace* trace = nullptr) {
  if (inputs.empty()) fail("numeric", "gru_forward: empty input sequence");
  const Eigen::Index d = gru.Wz.rows();
  Vec h = Vec::Zero(d);
  for (const Vec& x : inputs) {
    Vec az = gru.Wz * x + gru.Uz * h + gru.bz.col(0);
    Vec ar = gru.Wr * x + gru.Ur * h + gru.br.col(0);
    Vec z = az.unaryExpr([](double v) { return sigmoid(v); });
    Vec r = ar.unaryExpr([](double v) { return sigmoid(v); });
    Vec ah = gru.Wh * x + gru.Uh * (r.cwiseProduct(h)) + gru.bh.col(0);
    Vec hhat = ah.array().tanh();
    Vec h_next = (Vec::Ones(d) - z).cwiseProduct(h) + z.cwiseProduct(hhat);
    if (trace != nullptr) {
      trace->x.push_back(x);
      trace->z.push_back(z);
      trace->r.push_back(r);
      trace->hhat.push_back(hhat);
      trace->h.push_back(h_next);
    }
    h = std::move(h_next);
  }
  return h;
}

inline Vec stable_softmax(const Vec& logits) {
  const double m = logits.maxCoeff();
  Vec p = (logits.array() - m).exp();
  return p / p.sum();
}

inline double log_sum_exp(const Vec& logits) {
  const double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

// softmax(Ws q), no bias term.
inline Vec next_item_distribution(const Vec& q, const Mat& Ws) {
  return stable_softmax(Ws * q);
}

}  // namespace sagittarius

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
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sagittarius/common.hpp"
#include "sagittarius/data.hpp"
#include "sagittarius/model.hpp"

namespace sagittarius {

// Single binary artifact: hyperparams, key<->id maps, and every parameter
// tensor with a shape header. Doubles are stored raw, so a write/read
// round-trip is bit-exact.
struct Checkpoint {
  Hyperparams hyper;
  IdIndex index;
  ModelParams params;
};

namespace detail {

constexpr char kCheckpointMagic[8] = {'S', 'G', 'T', 'R', 'C', 'K', 'P', '1'};

inline void put_i64(std::ostream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void put_str(std::ostream& out, const std::string& s) {
  put_i64(out, static_cast<std::int64_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline void put_mat(std::ostream& out, const Mat& m) {
  put_i64(out, m.rows());
  put_i64(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

inline std::int64_t get_i64(std::istream& in) {
  std::int64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) fail("io", "truncated checkpoint");
  return v;
}
inline double get_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) fail("io", "truncated checkpoint");
  return v;
}
inline std::string get_str(std::istream& in) {
  const std::int64_t n = get_i64(in);
  if (n < 0 || n > (1 << 28)) fail("io", "corrupt string length in checkpoint");
  std::string s(static_cast<std::size_t>(n), '\0');
  in.read(s.data(), n);
  if (!in) fail("io", "truncated checkpoint");
  return s;
}
inline Mat get_mat(std::istream& in) {
  const std::int64_t rows = get_i64(in);
  const std::int64_t cols = get_i64(in);
  if (rows < 0 || cols < 0) fail("io", "corrupt tensor shape in checkpoint");
  Mat m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) fail("io", "truncated checkpoint");
  return m;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io", "cannot open '" + path + "' for writing");
  using namespace detail;
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));

  const Hyperparams& h = ckpt.hyper;
  put_i64(out, h.embed_dim);
  put_i64(out, h.final_dim);
  put_i64(out, h.n_layers);
  put_f64(out, h.lambda1);
  put_f64(out, h.lambda2);
  put_f64(out, h.lambda3);
  put_i64(out, h.n_negatives);
  put_f64(out, h.learning_rate);
  put_i64(out, h.max_seq_len);
  put_i64(out, h.epochs);
  put_i64(out, h.patience);
  put_i64(out, h.batch_quads);
  put_i64(out, static_cast<std::int64_t>(h.seed));

  put_i64(out, ckpt.index.n_users());
  for (const auto& k : ckpt.index.user_keys) put_str(out, k);
  put_i64(out, ckpt.index.n_items());
  for (const auto& k : ckpt.index.item_keys) put_str(out, k);

  std::int64_t n_tensors = 0;
  ckpt.params.for_each_tensor([&](const std::string&, const Mat&) { ++n_tensors; });
  put_i64(out, n_tensors);
  ckpt.params.for_each_tensor([&](const std::string& name, const Mat& m) {
    put_str(out, name);
    put_mat(out, m);
  });
  if (!out) fail("io", "write failure on '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open checkpoint '" + path + "'");
  using namespace detail;
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    fail("io", "'" + path + "' is not a sagittarius checkpoint");
  }

  Checkpoint ckpt;
  Hyperparams& h = ckpt.hyper;
  h.embed_dim = static_cast<int>(get_i64(in));
  h.final_dim = static_cast<int>(get_i64(in));
  h.n_layers = static_cast<int>(get_i64(in));
  h.lambda1 = get_f64(in);
  h.lambda2 = get_f64(in);
  h.lambda3 = get_f64(in);
  h.n_negatives = static_cast<int>(get_i64(in));
  h.learning_rate = get_f64(in);
  h.max_seq_len = static_cast<int>(get_i64(in));
  h.epochs = static_cast<int>(get_i64(in));
  h.patience = static_cast<int>(get_i64(in));
  h.batch_quads = static_cast<int>(get_i64(in));
  h.seed = static_cast<std::uint64_t>(get_i64(in));

  const std::int64_t n_users = get_i64(in);
  for (std::int64_t i = 0; i < n_users; ++i) {
    const std::string key = get_str(in);
    ckpt.index.user_ids[key] = static_cast<int>(ckpt.index.user_keys.size());
    ckpt.index.user_keys.push_back(key);
  }
  const std::int64_t n_items = get_i64(in);
  for (std::int64_t i = 0; i < n_items; ++i) {
    const std::string key = get_str(in);
    ckpt.index.item_ids[key] = static_cast<int>(ckpt.index.item_keys.size());
    ckpt.index.item_keys.push_back(key);
  }

  // Shape the parameter struct, then fill tensors by name.
  ckpt.params.E_u.resize(n_users, h.embed_dim);
  ckpt.params.E_v.resize(n_items, h.embed_dim);
  ckpt.params.W1.assign(h.n_layers, Mat());
  const std::int64_t n_tensors = get_i64(in);
  std::int64_t expected = 0;
  ckpt.params.for_each_tensor([&](const std::string&, const Mat&) { ++expected; });
  if (n_tensors != expected) fail("io", "checkpoint tensor count mismatch");
  ckpt.params.for_each_tensor([&](const std::string& name, Mat& m) {
    const std::string stored = get_str(in);
    if (stored != name) {
      fail("io", "checkpoint tensor order mismatch: expected " + name +
                     ", found " + stored);
    }
    m = get_mat(in);
  });
  if (!ckpt.params.all_finite()) {
    fail("numeric", "checkpoint '" + path + "' contains non-finite values");
  }
  return ckpt;
}

}  // namespace sagittarius

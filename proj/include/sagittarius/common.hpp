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

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace sagittarius {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// All failures surface as Error with a machine-parsable category
// (config, io, data, numeric, usage).
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& msg)
      : std::runtime_error(msg), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

[[noreturn]] inline void fail(const std::string& category,
                              const std::string& msg) {
  throw Error(category, msg);
}

using Rng = std::mt19937_64;

// Uniform double in [0, 1). Implemented directly on the raw generator so
// results do not depend on the standard library's distribution internals.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Uniform integer in [0, n). Rejection sampling for exact uniformity.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + exp(x)) without overflow; -log_sigmoid(x) == softplus(-x).
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace sagittarius

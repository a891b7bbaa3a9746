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

#include <array>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sagittarius/common.hpp"
#include "sagittarius/data.hpp"
#include "sagittarius/model.hpp"

namespace sagittarius {

// Everything one experiment needs, read from an INI-style text file:
// `[section]` headers, `key = value` lines, `#` comments. The [scores]
// section lists `behavior = score` pairs; omitting it selects numeric
// identity scoring (rating labels score as their own value).
struct ExperimentConfig {
  std::string data_path;
  InputFormat format = InputFormat::movielens_tab;
  BehaviorScoreMap scores = BehaviorScoreMap::numeric_identity();

  std::array<double, 3> ratios = {0.7, 0.1, 0.2};
  std::uint64_t split_seed = 42;

  Hyperparams hyper;

  std::vector<int> k_list = {10};
  int workers = 1;

  bool disable_bpr = false;
  bool disable_ctr = false;
  bool disable_seq = false;
  bool disable_behavior_weighting = false;

  std::string output_dir = "out";

  void validate() const {
    if (data_path.empty()) fail("config", "data.path must be set");
    if (output_dir.empty()) fail("config", "output.dir must be non-empty");
    if (disable_bpr && disable_ctr && disable_seq) {
      fail("config", "cannot disable all three losses");
    }
    if (k_list.empty()) fail("config", "eval.k must list at least one value");
    for (int k : k_list) {
      if (k < 1) fail("config", "eval.k values must be >= 1");
    }
    if (workers < 1) fail("config", "eval.workers must be >= 1");
    hyper.validate();
  }

  // Hyperparams with the ablation flags folded into the loss weights.
  Hyperparams effective_hyper() const {
    Hyperparams h = hyper;
    if (disable_bpr) h.lambda1 = 0.0;
    if (disable_ctr) h.lambda2 = 0.0;
    if (disable_seq) h.lambda3 = 0.0;
    return h;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, std::size_t lineno) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail("config", "line " + std::to_string(lineno) + ": expected boolean, got '" +
                     v + "'");
}

inline double parse_double(const std::string& v, std::size_t lineno) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  fail("config", "line " + std::to_string(lineno) + ": bad number '" + v + "'");
}

inline std::int64_t parse_int(const std::string& v, std::size_t lineno) {
  try {
    std::size_t pos = 0;
    const std::int64_t d = std::stoll(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  fail("config", "line " + std::to_string(lineno) + ": bad integer '" + v + "'");
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string section;
  std::string line;
  std::size_t lineno = 0;
  bool scores_section_seen = false;

  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        fail("config", "line " + std::to_string(lineno) + ": unterminated section");
      }
      section = line.substr(1, line.size() - 2);
      if (section != "data" && section != "scores" && section != "split" &&
          section != "model" && section != "train" && section != "eval" &&
          section != "ablation" && section != "output") {
        fail("config",
             "line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      }
      if (section == "scores") {
        scores_section_seen = true;
        cfg.scores = BehaviorScoreMap();
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail("config", "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      fail("config", "line " + std::to_string(lineno) + ": empty key");
    }

    auto unknown = [&]() -> void {
      fail("config", "line " + std::to_string(lineno) + ": unknown key '" + key +
                         "' in section [" + section + "]");
    };

    if (section == "data") {
      if (key == "path") cfg.data_path = value;
      else if (key == "format") cfg.format = parse_input_format(value);
      else unknown();
    } else if (section == "scores") {
      const double s = detail::parse_double(value, lineno);
      if (!(s > 0.0)) {
        fail("config", "line " + std::to_string(lineno) + ": score for '" + key +
                           "' must be > 0");
      }
      cfg.scores.add(key, s);
    } else if (section == "split") {
      if (key == "train") cfg.ratios[0] = detail::parse_double(value, lineno);
      else if (key == "validation") cfg.ratios[1] = detail::parse_double(value, lineno);
      else if (key == "test") cfg.ratios[2] = detail::parse_double(value, lineno);
      else if (key == "seed") cfg.split_seed = static_cast<std::uint64_t>(detail::parse_int(value, lineno));
      else unknown();
    } else if (section == "model") {
      if (key == "embed_dim") cfg.hyper.embed_dim = static_cast<int>(detail::parse_int(value, lineno));
      else if (key == "final_dim") cfg.hyper.final_dim = static_cast<int>(detail::parse_int(value, lineno));
      else if (key == "n_layers") cfg.hyper.n_layers = static_cast<int>(detail::parse_int(value, lineno));
      else if (key == "lambda1") cfg.hyper.lambda1 = detail::parse_double(value, lineno);
      else if (key == "lambda2") cfg.hyper.lambda2 = detail::parse_double(value, lineno);
      else if (key == "lambda3") cfg.hyper.lambda3 = detail::parse_double(value, lineno);
      else unknown();
    } else if (section == "train") {
      if (key == "n_negatives") cfg.hyper.n_negatives = static_cast<int>(detail::parse_int(value, lineno));
      else if (key == "learning_rate") cfg.hyper.learning_rate = detail::parse_double(value, lineno);
      else if (key == "max_seq_len") cfg.hyper.max_seq_len = static_cast<int>(detail::parse_int(value, lineno));
      else if (key == "epochs") cfg.hyper.epochs = static_cast<int>(detail::parse_int(value, lineno));
      else if (key == "patience") cfg.hyper.patience = static_cast<int>(detail::parse_int(value, lineno));
      else if (key == "batch_quads") cfg.hyper.batch_quads = static_cast<int>(detail::parse_int(value, lineno));
      else if (key == "seed") cfg.hyper.seed = static_cast<std::uint64_t>(detail::parse_int(value, lineno));
      else unknown();
    } else if (section == "eval") {
      if (key == "k") {
        cfg.k_list.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          cfg.k_list.push_back(static_cast<int>(detail::parse_int(detail::trim(tok), lineno)));
        }
      } else if (key == "workers") {
        cfg.workers = static_cast<int>(detail::parse_int(value, lineno));
      } else {
        unknown();
      }
    } else if (section == "ablation") {
      if (key == "disable_bpr") cfg.disable_bpr = detail::parse_bool(value, lineno);
      else if (key == "disable_ctr") cfg.disable_ctr = detail::parse_bool(value, lineno);
      else if (key == "disable_seq") cfg.disable_seq = detail::parse_bool(value, lineno);
      else if (key == "disable_behavior_weighting") cfg.disable_behavior_weighting = detail::parse_bool(value, lineno);
      else unknown();
    } else if (section == "output") {
      if (key == "dir") cfg.output_dir = value;
      else unknown();
    } else {
      fail("config", "line " + std::to_string(lineno) + ": key '" + key +
                         "' outside any section");
    }
  }

  if (scores_section_seen && cfg.scores.empty()) {
    fail("config", "[scores] section present but empty");
  }
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open config '" + path + "'");
  return parse_config(in);
}

// The resolved configuration, re-readable by parse_config; written next to
// every run's outputs so the run can be reproduced exactly.
inline std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "[data]\n"
     << "path = " << cfg.data_path << "\n"
     << "format = "
     << (cfg.format == InputFormat::movielens_tab ? "movielens_tab" : "generic_csv")
     << "\n";
  if (!cfg.scores.is_numeric_identity()) {
    os << "[scores]\n";
    for (const auto& [label, score] : cfg.scores.entries()) {
      os << label << " = " << score << "\n";
    }
  }
  os << "[split]\n"
     << "train = " << cfg.ratios[0] << "\n"
     << "validation = " << cfg.ratios[1] << "\n"
     << "test = " << cfg.ratios[2] << "\n"
     << "seed = " << cfg.split_seed << "\n"
     << "[model]\n"
     << "embed_dim = " << cfg.hyper.embed_dim << "\n"
     << "final_dim = " << cfg.hyper.final_dim << "\n"
     << "n_layers = " << cfg.hyper.n_layers << "\n"
     << "lambda1 = " << cfg.hyper.lambda1 << "\n"
     << "lambda2 = " << cfg.hyper.lambda2 << "\n"
     << "lambda3 = " << cfg.hyper.lambda3 << "\n"
     << "[train]\n"
     << "n_negatives = " << cfg.hyper.n_negatives << "\n"
     << "learning_rate = " << cfg.hyper.learning_rate << "\n"
     << "max_seq_len = " << cfg.hyper.max_seq_len << "\n"
     << "epochs = " << cfg.hyper.epochs << "\n"
     << "patience = " << cfg.hyper.patience << "\n"
     << "batch_quads = " << cfg.hyper.batch_quads << "\n"
     << "seed = " << cfg.hyper.seed << "\n"
     << "[eval]\n"
     << "k = ";
  for (std::size_t i = 0; i < cfg.k_list.size(); ++i) {
    os << (i > 0 ? "," : "") << cfg.k_list[i];
  }
  os << "\n"
     << "workers = " << cfg.workers << "\n"
     << "[ablation]\n"
     << "disable_bpr = " << (cfg.disable_bpr ? "true" : "false") << "\n"
     << "disable_ctr = " << (cfg.disable_ctr ? "true" : "false") << "\n"
     << "disable_seq = " << (cfg.disable_seq ? "true" : "false") << "\n"
     << "disable_behavior_weighting = "
     << (cfg.disable_behavior_weighting ? "true" : "false") << "\n"
     << "[output]\n"
     << "dir = " << cfg.output_dir << "\n";
  return os.str();
}

}  // namespace sagittarius

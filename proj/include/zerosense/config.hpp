// config.hpp
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
//
// INI configuration shared by every CLI stage. Unknown keys are rejected so
// typos do not silently fall back to defaults.
//
//   [general]   seed, jobs
//   [layout]    metrics (truetype|monospace), font, ascii_threshold
//   [zerotext]  oracle (ngram|remote), corpus, order, unit (word|char),
//               tau_init, max_relaxations, relax_factor, url, top_k
//   [render]    canvas_w, canvas_h, font_face, line_height_factor,
//               background (blank|inpainted_source), modes,
//               tokens_tiny, tokens_small, tokens_base, tokens_large,
//               tokenizer_vocab
//   [perturb]   permutations, tolerance
//   [harness]   client (echo|constant|file|wire), predictions, endpoint,
//               model, token_env, timeout_ms, retries, instruction,
//               bins, half_width, k_aggregation, epsilon, histogram_width

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "zerosense/core.hpp"
#include "zerosense/harness/client.hpp"
#include "zerosense/harness/decouple.hpp"
#include "zerosense/metrics/decoupling.hpp"
#include "zerosense/perturb/perturb.hpp"
#include "zerosense/render/theta.hpp"
#include "zerosense/zerotext/generate.hpp"
#include "zerosense/zerotext/ngram.hpp"

namespace zerosense {

struct Config {
  // [general]
  std::uint64_t seed = 0;
  int jobs = 4;

  // [layout]
  std::string layout_metrics = "truetype";
  std::string layout_font;  // empty: bundled face
  double ascii_threshold = kDefaultAsciiThreshold;

  // [zerotext]
  std::string oracle = "ngram";
  std::string oracle_corpus;
  zerotext::NgramOptions ngram;
  zerotext::GenSpec gen;
  std::string oracle_url;
  int oracle_top_k = 0;

  // [render]
  render::RenderTheta theta;
  std::vector<render::ResolutionMode> modes = {render::kAllModes.begin(), render::kAllModes.end()};
  std::string tokenizer_vocab;

  // [perturb]
  int permutations = 5;
  double tolerance = perturb::kDefaultHeightTolerance;

  // [harness]
  std::string client = "echo";
  std::string predictions;
  harness::WireOptions wire;
  std::string instruction = harness::kDefaultInstruction;
  harness::SweepConfig sweep;
  metrics::KAggregation k_aggregation = metrics::KAggregation::MeanThenDivide;
  double epsilon = 0.01;
  double histogram_width = 300.0;

  void validate() const {
    if (jobs < 1) throw Error("jobs must be at least 1");
    if (layout_metrics != "truetype" && layout_metrics != "monospace") {
      throw Error("layout.metrics must be truetype or monospace");
    }
    if (oracle != "ngram" && oracle != "remote") throw Error("zerotext.oracle must be ngram or remote");
    if (ngram.order < 1) throw Error("zerotext.order must be at least 1");
    gen.validate();
    theta.validate();
    if (modes.empty()) throw Error("render.modes is empty");
    if (permutations < 0) throw Error("perturb.permutations must be non-negative");
    if (!(tolerance >= 0.0 && tolerance <= 0.05)) throw Error("perturb.tolerance must lie in [0, 0.05]");
    sweep.validate();
    if (!(histogram_width > 0.0)) throw Error("harness.histogram_width must be positive");
  }
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = text::trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

inline std::vector<render::ResolutionMode> parse_modes(const std::string& s) {
  std::vector<render::ResolutionMode> out;
  for (const auto& m : split_list(s)) out.push_back(render::parse_mode(m));
  return out;
}

inline std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& v : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(v, &used));
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw Error("not a number: '" + v + "'");
    }
  }
  return out;
}

inline void set_bins(harness::SweepConfig& sweep, const std::vector<double>& centers, double half_width) {
  sweep.bins.clear();
  for (double c : centers) sweep.bins.push_back({c, half_width});
}

inline Config load_config(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }

  static const std::map<std::string, std::set<std::string>> known = {
      {"general", {"seed", "jobs"}},
      {"layout", {"metrics", "font", "ascii_threshold"}},
      {"zerotext",
       {"oracle", "corpus", "order", "unit", "tau_init", "max_relaxations", "relax_factor", "url", "top_k"}},
      {"render",
       {"canvas_w", "canvas_h", "font_face", "line_height_factor", "background", "modes", "tokens_tiny",
        "tokens_small", "tokens_base", "tokens_large", "tokenizer_vocab"}},
      {"perturb", {"permutations", "tolerance"}},
      {"harness",
       {"client", "predictions", "endpoint", "model", "token_env", "timeout_ms", "retries", "instruction", "bins",
        "half_width", "k_aggregation", "epsilon", "histogram_width"}},
  };
  for (const auto& [section, body] : tree) {
    const auto it = known.find(section);
    if (it == known.end()) throw Error("config " + path.string() + ": unknown section [" + section + "]");
    for (const auto& [key, _] : body) {
      if (!it->second.count(key)) throw Error("config " + path.string() + ": unknown key " + section + "." + key);
    }
  }

  Config c;
  auto get = [&](const char* key, auto fallback) {
    try {
      if (!tree.get_optional<std::string>(key)) return fallback;
      return tree.get<decltype(fallback)>(key);
    } catch (const pt::ptree_bad_data&) {
      throw Error("config " + path.string() + ": bad value for " + key);
    }
  };
  c.seed = get("general.seed", c.seed);
  c.jobs = get("general.jobs", c.jobs);

  c.layout_metrics = get("layout.metrics", c.layout_metrics);
  c.layout_font = get("layout.font", c.layout_font);
  c.ascii_threshold = get("layout.ascii_threshold", c.ascii_threshold);

  c.oracle = get("zerotext.oracle", c.oracle);
  c.oracle_corpus = get("zerotext.corpus", c.oracle_corpus);
  c.ngram.order = get("zerotext.order", c.ngram.order);
  const auto unit = get("zerotext.unit", std::string("word"));
  if (unit == "word") {
    c.ngram.unit = zerotext::TokenUnit::Word;
  } else if (unit == "char") {
    c.ngram.unit = zerotext::TokenUnit::Character;
  } else {
    throw Error("zerotext.unit must be word or char");
  }
  c.gen.tau_init = get("zerotext.tau_init", c.gen.tau_init);
  c.gen.max_relaxations = get("zerotext.max_relaxations", c.gen.max_relaxations);
  c.gen.relax_factor = get("zerotext.relax_factor", c.gen.relax_factor);
  c.oracle_url = get("zerotext.url", c.oracle_url);
  c.oracle_top_k = get("zerotext.top_k", c.oracle_top_k);

  c.theta.canvas_w = get("render.canvas_w", c.theta.canvas_w);
  c.theta.canvas_h = get("render.canvas_h", c.theta.canvas_h);
  c.theta.font_face = get("render.font_face", c.theta.font_face);
  c.theta.line_height_factor = get("render.line_height_factor", c.theta.line_height_factor);
  c.theta.background = render::parse_background(get("render.background", std::string("blank")));
  if (auto m = tree.get_optional<std::string>("render.modes")) c.modes = parse_modes(*m);
  for (auto m : render::kAllModes) {
    const std::string key = "render.tokens_" + std::string(render::to_string(m));
    c.theta.visual_tokens_per_mode[m] = get(key.c_str(), c.theta.visual_tokens_per_mode[m]);
  }
  c.tokenizer_vocab = get("render.tokenizer_vocab", c.tokenizer_vocab);

  c.permutations = get("perturb.permutations", c.permutations);
  c.tolerance = get("perturb.tolerance", c.tolerance);

  c.client = get("harness.client", c.client);
  c.predictions = get("harness.predictions", c.predictions);
  c.wire.endpoint = get("harness.endpoint", c.wire.endpoint);
  c.wire.model = get("harness.model", c.wire.model);
  c.wire.token_env = get("harness.token_env", c.wire.token_env);
  c.wire.timeout = std::chrono::milliseconds(get("harness.timeout_ms", static_cast<long>(c.wire.timeout.count())));
  c.wire.retries = get("harness.retries", c.wire.retries);
  c.instruction = get("harness.instruction", c.instruction);
  c.sweep.instruction = c.instruction;
  const double hw = get("harness.half_width", 1.25);
  if (auto b = tree.get_optional<std::string>("harness.bins")) {
    set_bins(c.sweep, parse_doubles(*b), hw);
  } else {
    for (auto& bin : c.sweep.bins) bin.half_width = hw;
  }
  c.k_aggregation = metrics::parse_aggregation(get("harness.k_aggregation", std::string("mean_then_divide")));
  c.epsilon = get("harness.epsilon", c.epsilon);
  c.histogram_width = get("harness.histogram_width", c.histogram_width);
  c.sweep.modes = c.modes;
  c.sweep.seeds = {c.seed};

  c.validate();
  return c;
}

}  // namespace zerosense

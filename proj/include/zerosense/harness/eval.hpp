// eval.hpp
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
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "zerosense/core.hpp"
#include "zerosense/corpus_io.hpp"
#include "zerosense/harness/client.hpp"
#include "zerosense/metrics/string_metrics.hpp"
#include "zerosense/render/render.hpp"

namespace zerosense::harness {

enum class DatasetTag { Original, ZeroSense, Shuffled, Text };

inline std::string_view to_string(DatasetTag t) {
  switch (t) {
    case DatasetTag::Original: return "original";
    case DatasetTag::ZeroSense: return "zerosense";
    case DatasetTag::Shuffled: return "shuffled";
    case DatasetTag::Text: return "text";
  }
  return "original";
}

inline DatasetTag parse_dataset_tag(std::string_view s) {
  if (s == "original") return DatasetTag::Original;
  if (s == "zerosense") return DatasetTag::ZeroSense;
  if (s == "shuffled") return DatasetTag::Shuffled;
  if (s == "text") return DatasetTag::Text;
  throw Error("unknown dataset tag '" + std::string(s) + "'");
}

/// Ground-truth transcription of a page: paragraph blocks one per line,
/// word blocks space separated, in block order.
inline std::string page_text(const PageAnnotation& page) {
  std::string out;
  const char sep = page.granularity == Granularity::Word ? ' ' : '\n';
  for (const auto& b : page.blocks) {
    if (text::trim(b.text).empty()) continue;
    if (!out.empty()) out += sep;
    out += b.text;
  }
  return out;
}

/// One (page, resolution mode) unit of evaluation.
struct EvalSample {
  std::string sample_id;
  std::string page_id;
  DatasetTag dataset = DatasetTag::Original;
  render::ResolutionMode mode = render::ResolutionMode::Base;
  double rho = 0.0;
  std::size_t text_tokens = 0;
  std::filesystem::path image_path;
  std::string ground_truth;
};

inline std::string sample_id(std::string_view page_id, render::ResolutionMode mode) {
  return std::string(page_id) + "@" + std::string(render::to_string(mode));
}

/// Pages of a rendered corpus joined with its render_meta.jsonl.
inline std::vector<EvalSample> load_rendered_corpus(const std::filesystem::path& dir, DatasetTag tag) {
  const Corpus corpus = load_corpus(dir);
  const auto metas = render::read_meta(dir / render::kRenderMetaName);
  std::map<std::string, const PageAnnotation*> by_id;
  for (const auto& p : corpus.pages) by_id[p.id] = &p;
  std::set<std::string> covered;
  std::vector<EvalSample> out;
  for (const auto& m : metas) {
    const auto it = by_id.find(m.id);
    if (it == by_id.end()) throw Error("render_meta names page '" + m.id + "' which is not in " + dir.string());
    EvalSample s;
    s.sample_id = sample_id(m.id, m.mode);
    s.page_id = m.id;
    s.dataset = tag;
    s.mode = m.mode;
    s.rho = m.ratio();
    s.text_tokens = m.text_tokens;
    s.image_path = corpus.image_path(*it->second);
    s.ground_truth = page_text(*it->second);
    out.push_back(std::move(s));
    covered.insert(m.id);
  }
  for (const auto& p : corpus.pages) {
    if (!covered.count(p.id)) throw Error("page '" + p.id + "' has no render_meta entry in " + dir.string());
  }
  std::sort(out.begin(), out.end(), [](const EvalSample& a, const EvalSample& b) { return a.sample_id < b.sample_id; });
  return out;
}

struct EvalRecord {
  std::string sample_id;
  std::string page_id;
  DatasetTag dataset = DatasetTag::Original;
  render::ResolutionMode mode = render::ResolutionMode::Base;
  double rho = 0.0;
  std::string model;
  std::string instruction;
  std::string ground_truth;
  std::string prediction;
  metrics::StringMetricResult metrics;
  std::string error;  // empty on success

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

inline nlohmann::ordered_json record_to_json(const EvalRecord& r) {
  return {{"sample_id", r.sample_id},
          {"page_id", r.page_id},
          {"dataset", to_string(r.dataset)},
          {"mode", render::to_string(r.mode)},
          {"rho", r.rho},
          {"model", r.model},
          {"instruction", r.instruction},
          {"gt", r.ground_truth},
          {"prediction", r.prediction},
          {"precision", r.metrics.precision},
          {"ned_similarity", r.metrics.ned_similarity},
          {"ned_distance", r.metrics.ned_distance},
          {"gt_len", r.metrics.gt_len},
          {"pred_len", r.metrics.pred_len},
          {"error", r.error}};
}

inline EvalRecord record_from_json(const nlohmann::json& j) {
  EvalRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.page_id = j.at("page_id").get<std::string>();
  r.dataset = parse_dataset_tag(j.at("dataset").get<std::string>());
  r.mode = render::parse_mode(j.at("mode").get<std::string>());
  r.rho = j.at("rho").get<double>();
  r.model = j.at("model").get<std::string>();
  r.instruction = j.at("instruction").get<std::string>();
  r.ground_truth = j.at("gt").get<std::string>();
  r.prediction = j.at("prediction").get<std::string>();
  r.metrics.precision = j.at("precision").get<double>();
  r.metrics.ned_similarity = j.at("ned_similarity").get<double>();
  r.metrics.ned_distance = j.at("ned_distance").get<double>();
  r.metrics.gt_len = j.at("gt_len").get<std::size_t>();
  r.metrics.pred_len = j.at("pred_len").get<std::size_t>();
  r.error = j.value("error", "");
  if (!(r.rho > 0.0)) throw Error("record '" + r.sample_id + "': rho must be positive");
  return r;
}

inline std::vector<EvalRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open records " + path.string());
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      // A crash can leave a torn last line; anything earlier is corruption.
      if (in.peek() == std::char_traits<char>::eof()) {
        spdlog::warn("{}: ignoring truncated final record {}", path.string(), n);
        break;
      }
      throw Error(path.string() + " record " + std::to_string(n) + ": invalid JSON");
    }
    try {
      out.push_back(record_from_json(j));
    } catch (const std::exception& e) {
      throw Error(path.string() + " record " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline void sort_records(std::vector<EvalRecord>& records) {
  std::sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
    if (a.page_id != b.page_id) return a.page_id < b.page_id;
    if (a.model != b.model) return a.model < b.model;
    return a.sample_id < b.sample_id;
  });
}

inline void write_records(std::span<const EvalRecord> records, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

struct EvalOptions {
  std::string instruction = kDefaultInstruction;
  int jobs = 4;
  metrics::NormalizeOptions normalize;
  std::optional<std::filesystem::path> output;  // appended as records complete
  bool resume = true;                           // skip samples already in `output`
};

inline EvalRecord evaluate_sample(const EvalSample& s, const ModelClient& client, const EvalOptions& opts) {
  EvalRecord r;
  r.sample_id = s.sample_id;
  r.page_id = s.page_id;
  r.dataset = s.dataset;
  r.mode = s.mode;
  r.rho = s.rho;
  r.model = client.identity();
  r.instruction = opts.instruction;
  r.ground_truth = s.ground_truth;
  try {
    r.prediction = client.predict({s.sample_id, s.page_id, opts.instruction, s.image_path, s.ground_truth});
  } catch (const ClientUnreachable&) {
    throw;
  } catch (const std::exception& e) {
    r.prediction.clear();
    r.error = e.what();
  }
  r.metrics = metrics::evaluate_strings(r.ground_truth, r.prediction, opts.normalize);
  return r;
}

/// One record per (sample, model). Model calls run on a bounded pool; the
/// returned list is sorted by (page id, model, sample id) regardless of
/// completion order. Failed calls become empty predictions with an error.
inline std::vector<EvalRecord> run_eval(std::span<const EvalSample> samples, const ModelClient& client,
                                        const EvalOptions& opts = {}) {
  const std::string model = client.identity();
  std::vector<EvalRecord> records;
  std::set<std::string> done;
  std::ofstream sink;
  if (opts.output) {
    // Rewrite what is already there (dropping a torn final line), keeping
    // other models' records and, when resuming, this model's as well.
    std::vector<EvalRecord> keep;
    if (std::filesystem::exists(*opts.output)) {
      for (auto& r : read_records(*opts.output)) {
        if (r.model != model) {
          keep.push_back(std::move(r));
        } else if (opts.resume && done.insert(r.sample_id).second) {
          keep.push_back(r);
          records.push_back(std::move(r));
        }
      }
    }
    if (!done.empty()) spdlog::info("resuming: {} records already present", done.size());
    write_records(keep, *opts.output);
    sink.open(*opts.output, std::ios::app | std::ios::binary);
    if (!sink) throw Error("cannot append to " + opts.output->string());
  }
  std::vector<const EvalSample*> todo;
  for (const auto& s : samples) {
    if (!done.count(s.sample_id)) todo.push_back(&s);
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  auto worker = [&] {
    while (!abort) {
      const std::size_t i = next++;
      if (i >= todo.size()) return;
      try {
        EvalRecord r = evaluate_sample(*todo[i], client, opts);
        if (!r.error.empty()) spdlog::warn("{}: {}", r.sample_id, r.error);
        std::lock_guard lock(mu);
        if (sink.is_open()) {
          sink << record_to_json(r).dump() << '\n';
          sink.flush();
        }
        records.push_back(std::move(r));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!abort.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(std::max<std::size_t>(todo.size(), 1))));
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  sort_records(records);
  return records;
}

}  // namespace zerosense::harness

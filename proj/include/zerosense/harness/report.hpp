// report.hpp
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
// CSV writers for decoupled points, shuffled comparisons, token histograms
// and strategy scores. Numbers use six decimals; undefined values are empty
// cells.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "zerosense/core.hpp"
#include "zerosense/harness/decouple.hpp"
#include "zerosense/harness/eval.hpp"
#include "zerosense/metrics/decoupling.hpp"
#include "zerosense/render/theta.hpp"

namespace zerosense::harness {

inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "";
  if (v == 0.0) v = 0.0;  // no "-0.000000"
  return fmt::format("{:.6f}", v);
}

inline std::string fmt_bin(double center) { return fmt::format("{:g}", center); }

/// Quotes a cell only when it needs it.
inline std::string csv_cell(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(path.parent_path(), ec);
      if (ec) throw Error("cannot create " + path.parent_path().string() + ": " + ec.message());
    }
    out_.open(path, std::ios::binary);
    if (!out_) throw Error("cannot write " + path.string());
  }

  void row(std::initializer_list<std::string> cells) { row(std::vector<std::string>(cells)); }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_cell(cells[i]);
    }
    out_ << '\n';
    if (!out_) throw Error("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Long format, one row per (model, bin).
inline void write_decoupled_csv(const std::map<std::string, std::vector<metrics::DecoupledPoint>>& per_model,
                                std::string_view dataset, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.row({"bin", "dataset", "F_full", "F_zero", "F_prior", "OCR_raw", "K_quality", "mode", "model", "n_full", "n_zero",
         "gap", "anomaly", "NED_full", "NED_zero", "NED_prior"});
  for (const auto& [model, points] : per_model) {
    for (const auto& p : points) {
      w.row({fmt_bin(p.compression_bin), std::string(dataset), fmt_num(p.f_full), fmt_num(p.f_zero), fmt_num(p.f_prior),
             fmt_num(p.ocr_raw), fmt_num(p.k_quality), std::string(metrics::to_string(p.mode)), model,
             std::to_string(p.n_full), std::to_string(p.n_zero), p.gap ? "1" : "0", p.anomaly ? "1" : "0",
             fmt_num(p.ned_full), fmt_num(p.ned_zero), fmt_num(p.ned_prior)});
    }
  }
}

/// Combined table: one row per point.
inline void write_tables_csv(std::span<const metrics::DecoupledPoint> points, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.row({"Compression", "F_full", "F_zero", "F_prior", "OCR_raw", "K_quality"});
  for (const auto& p : points) {
    w.row({fmt_bin(p.compression_bin), fmt_num(p.f_full), fmt_num(p.f_zero), fmt_num(p.f_prior), fmt_num(p.ocr_raw),
           fmt_num(p.k_quality)});
  }
}

inline void write_preservation_csv(std::span<const metrics::DecoupledPoint> points, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.row({"Compression", "K_quality"});
  for (const auto& p : points) w.row({fmt_bin(p.compression_bin), fmt_num(p.k_quality)});
}

inline void write_prior_csv(std::span<const metrics::DecoupledPoint> points, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.row({"Compression", "F_full", "F_zero", "F_prior"});
  for (const auto& p : points) {
    w.row({fmt_bin(p.compression_bin), fmt_num(p.f_full), fmt_num(p.f_zero), fmt_num(p.f_prior)});
  }
}

inline void write_ocr_raw_csv(std::span<const metrics::DecoupledPoint> points, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.row({"Compression", "OCR_raw"});
  for (const auto& p : points) w.row({fmt_bin(p.compression_bin), fmt_num(p.ocr_raw)});
}

/// Edit-distance channel. Distances are lower-is-better; NED_prior = full - zero,
/// so a negative value means the real text read worse than the zero text.
inline void write_ned_csv(std::span<const metrics::DecoupledPoint> points, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.row({"Compression", "NED_full", "NED_zero", "NED_prior", "NEDsim_full", "NEDsim_zero"});
  auto sim = [](double d) { return std::isnan(d) ? d : 1.0 - d; };
  for (const auto& p : points) {
    w.row({fmt_bin(p.compression_bin), fmt_num(p.ned_full), fmt_num(p.ned_zero), fmt_num(p.ned_prior),
           fmt_num(sim(p.ned_full)), fmt_num(sim(p.ned_zero))});
  }
}

struct ShuffledRow {
  double compression_bin = 0.0;
  double original = std::numeric_limits<double>::quiet_NaN();
  double shuffled = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_original = 0;
  std::size_t n_shuffled = 0;

  /// Drop from original to shuffled; positive when shuffling hurts.
  [[nodiscard]] double delta_drop() const { return original - shuffled; }
};

inline std::vector<ShuffledRow> shuffled_comparison(std::span<const EvalRecord> original,
                                                    std::span<const EvalRecord> shuffled, const SweepConfig& config) {
  const auto o = bin_means(original, config);
  const auto s = bin_means(shuffled, config);
  std::vector<ShuffledRow> out;
  for (std::size_t i = 0; i < config.bins.size(); ++i) {
    if (o[i].n == 0 && s[i].n == 0) continue;
    out.push_back({config.bins[i].center, o[i].precision, s[i].precision, o[i].n, s[i].n});
  }
  return out;
}

inline void write_shuffled_csv(std::span<const ShuffledRow> rows, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.row({"Compression", "Original", "Shuffled", "Delta_Drop", "Delta_Signed", "n_original", "n_shuffled"});
  for (const auto& r : rows) {
    w.row({fmt_bin(r.compression_bin), fmt_num(r.original), fmt_num(r.shuffled), fmt_num(r.delta_drop()),
           fmt_num(-r.delta_drop()), std::to_string(r.n_original), std::to_string(r.n_shuffled)});
  }
}

struct Histogram {
  double lo = 0.0;
  double width = 1.0;
  std::vector<std::size_t> counts;

  [[nodiscard]] double hi() const { return lo + width * static_cast<double>(counts.size()); }
};

/// Fixed-width bins starting at floor(min/width)*width and ending just past the maximum.
inline Histogram token_histogram(std::span<const double> values, double width) {
  if (!(width > 0.0)) throw Error("histogram bin width must be positive");
  if (values.empty()) throw Error("histogram of an empty sample");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  Histogram h;
  h.width = width;
  const double first = std::floor(*mn / width);
  h.lo = first * width;
  h.counts.assign(static_cast<std::size_t>(std::floor(*mx / width) - first) + 1, 0);
  for (double v : values) ++h.counts[static_cast<std::size_t>(std::floor(v / width) - first)];
  return h;
}

inline void write_histogram_csv(const Histogram& h, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.row({"bin_lo", "bin_hi", "count"});
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double lo = h.lo + h.width * static_cast<double>(i);
    w.row({fmt::format("{:g}", lo), fmt::format("{:g}", lo + h.width), std::to_string(h.counts[i])});
  }
}

/// Per-model deltas of visual precision against the text-input baseline of the
/// same page. Pages without a text record are compared against `baseline`.
inline std::map<std::string, std::vector<double>> strategy_deltas(std::span<const EvalRecord> visual,
                                                                  std::span<const EvalRecord> text_input,
                                                                  double baseline = 1.0) {
  std::map<std::pair<std::string, std::string>, double> text;
  for (const auto& r : text_input) text[{r.model, r.page_id}] = r.metrics.precision;
  std::map<std::string, std::vector<double>> out;
  for (const auto& r : visual) {
    const auto it = text.find({r.model, r.page_id});
    out[r.model].push_back(r.metrics.precision - (it == text.end() ? baseline : it->second));
  }
  return out;
}

inline void write_strategy_score(const metrics::StrategyScore& s, double epsilon, const std::filesystem::path& csv_path,
                                 const std::filesystem::path& txt_path) {
  {
    CsvWriter w(csv_path);
    w.row({"S_theta", "best_model", "information_preserving", "epsilon", "n_models"});
    w.row({fmt_num(s.s_theta), s.best_model, s.information_preserving ? "1" : "0", fmt_num(epsilon),
           std::to_string(s.means.size())});
  }
  std::ofstream out(txt_path, std::ios::binary);
  if (!out) throw Error("cannot write " + txt_path.string());
  std::size_t width = 5;
  for (const auto& [m, _] : s.means) width = std::max(width, m.size());
  out << fmt::format("{:<{}}  {:>10}\n", "model", width, "mean delta");
  for (const auto& [m, v] : s.means) out << fmt::format("{:<{}}  {:>10}\n", m, width, fmt_num(v));
  out << fmt::format("\nS(theta) = {} ({})\n", fmt_num(s.s_theta), s.best_model);
  out << fmt::format("verdict: {} (epsilon {})\n",
                     s.information_preserving ? "information-preserving" : "lossy", fmt_num(epsilon));
}

/// Everything a report run may emit. Optional parts are skipped when absent.
struct ReportInputs {
  std::string dataset = "zerosense";
  std::map<std::string, std::vector<metrics::DecoupledPoint>> points;  // per model
  std::optional<metrics::LinearCalibration> calibration;
  SweepConfig sweep;
  render::RenderTheta theta;  // for the visual-token assumption table
  std::vector<EvalRecord> original;
  std::vector<EvalRecord> shuffled;
  std::vector<EvalRecord> text_input;
  std::vector<double> text_token_counts;
  double histogram_width = 300.0;
  double strategy_epsilon = 0.01;
};

inline std::string model_slug(std::string_view model) {
  std::string out;
  for (char c : model) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

/// Writes every report artifact under `out` and returns the files written.
inline std::vector<std::filesystem::path> write_report(const ReportInputs& in, const std::filesystem::path& out) {
  if (in.points.empty() && in.original.empty() && in.text_token_counts.empty()) {
    throw Error("report: nothing to write");
  }
  std::vector<std::filesystem::path> files;
  auto add = [&](std::filesystem::path p) { return files.emplace_back(out / std::move(p)); };

  if (!in.points.empty()) {
    write_decoupled_csv(in.points, in.dataset, add("decoupled.csv"));
    const bool single = in.points.size() == 1;
    for (const auto& [model, points] : in.points) {
      const std::string suffix = single ? "" : "_" + model_slug(model);
      write_tables_csv(points, add("tables" + suffix + ".csv"));
      write_preservation_csv(points, add("table1_preservation" + suffix + ".csv"));
      write_prior_csv(points, add("table2_prior" + suffix + ".csv"));
      write_ocr_raw_csv(points, add("table3_ocr_raw" + suffix + ".csv"));
      write_ned_csv(points, add("supplementary_ned" + suffix + ".csv"));
    }
  }

  if (!in.original.empty() && !in.shuffled.empty()) {
    const auto models = models_in(in.original);
    const bool single = models.size() == 1;
    for (const auto& m : models) {
      const auto rows = shuffled_comparison(filter_model(in.original, m), filter_model(in.shuffled, m), in.sweep);
      write_shuffled_csv(rows, add("table4_shuffled" + (single ? std::string() : "_" + model_slug(m)) + ".csv"));
    }
  }

  if (!in.text_token_counts.empty()) {
    write_histogram_csv(token_histogram(in.text_token_counts, in.histogram_width), add("token_histogram.csv"));
  }

  if (!in.original.empty()) {
    const auto score = metrics::strategy_score(strategy_deltas(in.original, in.text_input), in.strategy_epsilon);
    write_strategy_score(score, in.strategy_epsilon, add("strategy_score.csv"), add("strategy_score.txt"));
  }

  nlohmann::ordered_json meta;
  meta["dataset"] = in.dataset;
  meta["models"] = nlohmann::json::array();
  for (const auto& [m, pts] : in.points) {
    meta["models"].push_back(m);
    if (!pts.empty()) meta["k_aggregation"] = metrics::to_string(pts.front().mode);
  }
  nlohmann::ordered_json vt;
  for (auto m : render::kAllModes) vt[std::string(render::to_string(m))] = in.theta.visual_tokens_per_mode.at(m);
  meta["visual_tokens_per_mode"] = vt;
  meta["visual_tokens_source"] = "assumption table (configurable)";
  meta["bins"] = nlohmann::json::array();
  for (const auto& b : in.sweep.bins) meta["bins"].push_back({b.center, b.half_width});
  if (in.calibration) meta["calibration"] = calibration_to_json(*in.calibration);
  meta["text_baseline"] = in.text_input.empty() ? "constant 1.0" : "text-input records";
  const auto meta_path = add("report_meta.json");
  std::ofstream mo(meta_path, std::ios::binary);
  if (!mo) throw Error("cannot write " + meta_path.string());
  mo << meta.dump(2) << '\n';
  return files;
}

}  // namespace zerosense::harness

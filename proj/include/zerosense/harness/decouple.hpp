// decouple.hpp
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
// Per-bin aggregation of evaluation records into decoupled points.

#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "zerosense/core.hpp"
#include "zerosense/harness/eval.hpp"
#include "zerosense/metrics/decoupling.hpp"
#include "zerosense/render/theta.hpp"

namespace zerosense::harness {

struct RatioBin {
  double center = 0.0;
  double half_width = 1.25;

  [[nodiscard]] double lo() const { return center - half_width; }
  [[nodiscard]] double hi() const { return center + half_width; }
  /// Half-open: [center - half_width, center + half_width).
  [[nodiscard]] bool contains(double rho) const { return rho >= lo() && rho < hi(); }
};

struct SweepConfig {
  std::vector<RatioBin> bins = {{2.5, 1.25}, {5.0, 1.25}, {7.5, 1.25}, {10.0, 1.25},
                                {12.5, 1.25}, {15.0, 1.25}, {17.5, 1.25}};
  std::vector<render::ResolutionMode> modes = {render::kAllModes.begin(), render::kAllModes.end()};
  std::vector<std::uint64_t> seeds = {0};
  std::string instruction = kDefaultInstruction;

  void validate() const {
    if (bins.empty()) throw Error("sweep needs at least one ratio bin");
    std::vector<RatioBin> sorted = bins;
    std::sort(sorted.begin(), sorted.end(), [](const RatioBin& a, const RatioBin& b) { return a.center < b.center; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (!(sorted[i].half_width > 0.0)) throw Error("ratio bin half-width must be positive");
      if (i > 0 && sorted[i].lo() < sorted[i - 1].hi() - 1e-12) {
        throw Error("ratio bins centred at " + std::to_string(sorted[i - 1].center) + " and " +
                    std::to_string(sorted[i].center) + " overlap");
      }
    }
  }

  /// Index of the bin holding `rho`, if any.
  [[nodiscard]] std::optional<std::size_t> bin_of(double rho) const {
    for (std::size_t i = 0; i < bins.size(); ++i) {
      if (bins[i].contains(rho)) return i;
    }
    return std::nullopt;
  }
};

inline std::vector<std::string> models_in(std::span<const EvalRecord> records) {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.model);
  return {s.begin(), s.end()};
}

inline std::vector<EvalRecord> filter_model(std::span<const EvalRecord> records, std::string_view model) {
  std::vector<EvalRecord> out;
  for (const auto& r : records) {
    if (r.model == model) out.push_back(r);
  }
  return out;
}

struct BinStats {
  std::size_t n = 0;
  double precision = std::numeric_limits<double>::quiet_NaN();
  double ned_distance = std::numeric_limits<double>::quiet_NaN();
};

/// Mean precision and edit distance of the records falling in each bin.
inline std::vector<BinStats> bin_means(std::span<const EvalRecord> records, const SweepConfig& config) {
  std::vector<BinStats> out(config.bins.size());
  std::vector<double> p(config.bins.size(), 0.0), d(config.bins.size(), 0.0);
  for (const auto& r : records) {
    const auto b = config.bin_of(r.rho);
    if (!b) continue;
    ++out[*b].n;
    p[*b] += r.metrics.precision;
    d[*b] += r.metrics.ned_distance;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].n == 0) continue;
    out[i].precision = p[i] / static_cast<double>(out[i].n);
    out[i].ned_distance = d[i] / static_cast<double>(out[i].n);
  }
  return out;
}

/// One point per configured bin; records are expected to come from a single model.
inline std::vector<metrics::DecoupledPoint> decouple(std::span<const EvalRecord> records_full,
                                                     std::span<const EvalRecord> records_zero,
                                                     const metrics::LinearCalibration& calibration,
                                                     const SweepConfig& config,
                                                     metrics::KAggregation mode = metrics::KAggregation::MeanThenDivide) {
  config.validate();
  const auto full = bin_means(records_full, config);
  const auto zero = bin_means(records_zero, config);

  std::vector<double> per_sample_sum(config.bins.size(), 0.0);
  std::vector<std::size_t> per_sample_n(config.bins.size(), 0);
  if (mode == metrics::KAggregation::PerSample) {
    for (const auto& r : records_zero) {
      const auto b = config.bin_of(r.rho);
      if (!b) continue;
      const double o = calibration.predict(r.rho);
      if (o <= 0.0) continue;
      per_sample_sum[*b] += r.metrics.precision / o;
      ++per_sample_n[*b];
    }
  }

  std::vector<metrics::DecoupledPoint> out;
  for (std::size_t i = 0; i < config.bins.size(); ++i) {
    metrics::DecoupledPoint p;
    p.compression_bin = config.bins[i].center;
    p.mode = mode;
    p.n_full = full[i].n;
    p.n_zero = zero[i].n;
    p.f_full = full[i].precision;
    p.f_zero = zero[i].precision;
    p.ned_full = full[i].ned_distance;
    p.ned_zero = zero[i].ned_distance;
    p.ocr_raw = calibration.predict(p.compression_bin);
    if (p.n_full == 0 || p.n_zero == 0) {
      p.gap = true;
      spdlog::debug("bin {}: gap (full={}, zero={})", p.compression_bin, p.n_full, p.n_zero);
      out.push_back(p);
      continue;
    }
    p.f_prior = metrics::f_prior(p.f_full, p.f_zero);
    p.ned_prior = p.ned_full - p.ned_zero;
    if (p.ocr_raw <= 0.0) {
      spdlog::warn("bin {}: calibrated OCR_raw is zero, K_quality undefined", p.compression_bin);
    } else if (mode == metrics::KAggregation::MeanThenDivide) {
      p.k_quality = metrics::k_quality(p.f_full, p.f_prior, p.ocr_raw);
    } else if (per_sample_n[i] > 0) {
      p.k_quality = per_sample_sum[i] / static_cast<double>(per_sample_n[i]);
    }
    p.anomaly = !std::isnan(p.k_quality) && metrics::calibration_anomaly(p.k_quality);
    out.push_back(p);
  }
  return out;
}

/// Linear OCR_raw(rho) from reference records judged fully preserved.
/// Records carrying a client error are left out of the fit.
inline metrics::LinearCalibration calibrate_from_records(std::span<const EvalRecord> references) {
  std::vector<std::pair<double, double>> pts;
  std::vector<std::string> ids;
  for (const auto& r : references) {
    if (!r.error.empty()) continue;
    pts.emplace_back(r.rho, r.metrics.precision);
    ids.push_back(r.sample_id);
  }
  return metrics::fit_ocr_raw(pts, std::move(ids));
}

/// Points from a two-column CSV (ratio, accuracy) with an optional header line.
inline std::vector<std::pair<double, double>> read_calibration_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::pair<double, double>> pts;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double x = 0, y = 0;
    if (!(ss >> x >> y)) {
      if (n == 1) continue;  // header
      throw Error(path.string() + " line " + std::to_string(n) + ": expected 'ratio,accuracy'");
    }
    pts.emplace_back(x, y);
  }
  return pts;
}

inline nlohmann::ordered_json calibration_to_json(const metrics::LinearCalibration& c) {
  return {{"slope", c.slope},
          {"intercept", c.intercept},
          {"fit_residual_max", c.fit_residual_max},
          {"reference_sample_ids", c.reference_sample_ids}};
}

inline metrics::LinearCalibration calibration_from_json(const nlohmann::json& j) {
  metrics::LinearCalibration c;
  c.slope = j.at("slope").get<double>();
  c.intercept = j.at("intercept").get<double>();
  c.fit_residual_max = j.value("fit_residual_max", 0.0);
  c.reference_sample_ids = j.value("reference_sample_ids", std::vector<std::string>{});
  return c;
}

inline metrics::LinearCalibration load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open calibration " + path.string());
  try {
    return calibration_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline nlohmann::ordered_json point_to_json(const metrics::DecoupledPoint& p) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v); };
  return {{"bin", p.compression_bin}, {"F_full", num(p.f_full)},   {"F_zero", num(p.f_zero)},
          {"F_prior", num(p.f_prior)}, {"OCR_raw", num(p.ocr_raw)}, {"K_quality", num(p.k_quality)},
          {"mode", metrics::to_string(p.mode)}, {"n_full", p.n_full}, {"n_zero", p.n_zero},
          {"gap", p.gap},           {"anomaly", p.anomaly},       {"NED_full", num(p.ned_full)},
          {"NED_zero", num(p.ned_zero)}, {"NED_prior", num(p.ned_prior)}};
}

inline metrics::DecoupledPoint point_from_json(const nlohmann::json& j) {
  auto num = [&](const char* k) {
    const auto& v = j.at(k);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  metrics::DecoupledPoint p;
  p.compression_bin = j.at("bin").get<double>();
  p.f_full = num("F_full");
  p.f_zero = num("F_zero");
  p.f_prior = num("F_prior");
  p.ocr_raw = num("OCR_raw");
  p.k_quality = num("K_quality");
  p.mode = metrics::parse_aggregation(j.at("mode").get<std::string>());
  p.n_full = j.at("n_full").get<std::size_t>();
  p.n_zero = j.at("n_zero").get<std::size_t>();
  p.gap = j.at("gap").get<bool>();
  p.anomaly = j.at("anomaly").get<bool>();
  p.ned_full = num("NED_full");
  p.ned_zero = num("NED_zero");
  p.ned_prior = num("NED_prior");
  return p;
}

struct PointSet {
  std::string dataset;
  std::map<std::string, std::vector<metrics::DecoupledPoint>> per_model;
  std::optional<metrics::LinearCalibration> calibration;
};

inline void write_points(const PointSet& set, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["dataset"] = set.dataset;
  if (set.calibration) j["calibration"] = calibration_to_json(*set.calibration);
  j["models"] = nlohmann::ordered_json::object();
  for (const auto& [m, pts] : set.per_model) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : pts) arr.push_back(point_to_json(p));
    j["models"][m] = std::move(arr);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline PointSet read_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    PointSet set;
    set.dataset = j.value("dataset", std::string("zerosense"));
    if (j.contains("calibration")) set.calibration = calibration_from_json(j["calibration"]);
    for (const auto& [m, arr] : j.at("models").items()) {
      auto& pts = set.per_model[m];
      for (const auto& p : arr) pts.push_back(point_from_json(p));
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace zerosense::harness

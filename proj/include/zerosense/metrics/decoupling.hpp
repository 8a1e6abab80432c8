// decoupling.hpp
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
// Accuracy decomposition F = F_prior + OCR_raw * K_quality.
//
// F_prior is measured as F_full - F_zero, where F_zero is accuracy on the
// semantics-free rendering of the same layout. OCR_raw comes from a straight
// line fitted to (ratio, accuracy) points of fully preserved references.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zerosense/core.hpp"

namespace zerosense::metrics {

/// Share of accuracy explained by linguistic context. May be negative.
inline double f_prior(double f_full, double f_zero) { return f_full - f_zero; }

/// Text preservation rate. Values above 1 indicate a calibration anomaly and
/// are returned unclamped.
inline double k_quality(double f_full, double f_prior_v, double ocr_raw) {
  if (ocr_raw == 0.0) throw Error("k_quality: OCR_raw is zero");
  return (f_full - f_prior_v) / ocr_raw;
}

inline bool calibration_anomaly(double k) { return k > 1.0; }

struct LinearCalibration {
  double slope = 0.0;
  double intercept = 0.0;
  double fit_residual_max = 0.0;
  std::vector<std::string> reference_sample_ids;

  [[nodiscard]] double raw(double ratio) const { return intercept + slope * ratio; }
  [[nodiscard]] double predict(double ratio) const { return std::clamp(raw(ratio), 0.0, 1.0); }
};

/// Ordinary least squares line through (ratio, accuracy) points.
inline LinearCalibration fit_ocr_raw(std::span<const std::pair<double, double>> points,
                                     std::vector<std::string> reference_ids = {}) {
  if (points.size() < 2) throw Error("fit_ocr_raw: need at least two points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0) throw Error("fit_ocr_raw: all ratios identical");
  LinearCalibration c;
  c.slope = sxy / sxx;
  c.intercept = my - c.slope * mx;
  for (const auto& [x, y] : points) c.fit_residual_max = std::max(c.fit_residual_max, std::abs(y - c.raw(x)));
  c.reference_sample_ids = std::move(reference_ids);
  return c;
}

/// How K_quality is aggregated inside a bin.
enum class KAggregation {
  MeanThenDivide,  // (mean F_full - mean F_prior) / OCR_raw(bin centre)
  PerSample,       // mean over zero-text samples of precision / OCR_raw(sample ratio)
};

inline std::string_view to_string(KAggregation a) {
  return a == KAggregation::MeanThenDivide ? "mean_then_divide" : "per_sample";
}

inline KAggregation parse_aggregation(std::string_view s) {
  if (s == "mean_then_divide") return KAggregation::MeanThenDivide;
  if (s == "per_sample") return KAggregation::PerSample;
  throw Error("unknown K aggregation '" + std::string(s) + "'");
}

struct DecoupledPoint {
  double compression_bin = 0.0;
  double f_full = std::numeric_limits<double>::quiet_NaN();
  double f_zero = std::numeric_limits<double>::quiet_NaN();
  double f_prior = std::numeric_limits<double>::quiet_NaN();
  double ocr_raw = std::numeric_limits<double>::quiet_NaN();
  double k_quality = std::numeric_limits<double>::quiet_NaN();
  KAggregation mode = KAggregation::MeanThenDivide;
  std::size_t n_full = 0;
  std::size_t n_zero = 0;
  bool gap = false;      // a record set had no samples in this bin
  bool anomaly = false;  // K_quality > 1
  // Edit-distance channel (raw distances, lower is better); kept apart from precision.
  double ned_full = std::numeric_limits<double>::quiet_NaN();
  double ned_zero = std::numeric_limits<double>::quiet_NaN();
  double ned_prior = std::numeric_limits<double>::quiet_NaN();
};

/// Point from bin means and the calibrated OCR_raw.
inline DecoupledPoint decouple_point(double bin, double f_full, double f_zero, double ocr_raw) {
  DecoupledPoint p;
  p.compression_bin = bin;
  p.f_full = f_full;
  p.f_zero = f_zero;
  p.f_prior = f_prior(f_full, f_zero);
  p.ocr_raw = ocr_raw;
  p.k_quality = k_quality(f_full, p.f_prior, ocr_raw);
  p.anomaly = calibration_anomaly(p.k_quality);
  return p;
}

struct StrategyScore {
  std::map<std::string, double> means;
  double s_theta = 0.0;
  std::string best_model;
  bool information_preserving = false;
};

/// Per-model mean of (visual - text) accuracy deltas; the score is the best mean.
inline StrategyScore strategy_score(const std::map<std::string, std::vector<double>>& per_model_deltas,
                                    double epsilon = 0.01) {
  if (per_model_deltas.empty()) throw Error("strategy_score: no models");
  StrategyScore s;
  s.s_theta = -std::numeric_limits<double>::infinity();
  for (const auto& [model, deltas] : per_model_deltas) {
    if (deltas.empty()) throw Error("strategy_score: model '" + model + "' has no deltas");
    const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / static_cast<double>(deltas.size());
    s.means[model] = mean;
    if (mean > s.s_theta) {
      s.s_theta = mean;
      s.best_model = model;
    }
  }
  s.information_preserving = s.s_theta >= -epsilon;
  return s;
}

}  // namespace zerosense::metrics

// string_metrics.hpp
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
// Edit distance and character precision over Unicode scalar values.
//
// Precision is the number of matched characters in one optimal Levenshtein
// alignment divided by the ground-truth length. Among alignments of minimal
// cost the one with the most matches is used.

#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zerosense/unicode.hpp"

namespace zerosense::metrics {

inline std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return a.size();
  thread_local std::vector<std::size_t> row;
  row.resize(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(text::decode_utf8(a), text::decode_utf8(b));
}

struct NedResult {
  double distance = 0.0;
  double similarity = 1.0;
};

/// Distance over the longer length; two empty strings are at distance 0.
inline NedResult ned(std::u32string_view a, std::u32string_view b) {
  const std::size_t n = std::max(a.size(), b.size());
  if (n == 0) return {0.0, 1.0};
  const double d = static_cast<double>(levenshtein(a, b)) / static_cast<double>(n);
  return {d, 1.0 - d};
}

inline NedResult ned(std::string_view a, std::string_view b) { return ned(text::decode_utf8(a), text::decode_utf8(b)); }

struct NormalizeOptions {
  bool nfkc = true;
  bool collapse_whitespace = true;  // runs become one space, ends trimmed
  bool case_fold = false;
};

inline std::string normalize(std::string_view s, const NormalizeOptions& opts = {}) {
  std::string out(s);
  if (opts.nfkc) out = text::nfkc(out);
  if (opts.case_fold) out = text::case_fold(out);
  if (opts.collapse_whitespace) out = text::collapse_whitespace(out);
  return out;
}

/// Matched characters of a minimal-cost alignment, preferring more matches on ties.
inline std::size_t aligned_matches(std::u32string_view gt, std::u32string_view pred) {
  struct Cell {
    std::size_t cost;
    std::size_t matches;
  };
  auto better = [](const Cell& x, const Cell& y) {
    return x.cost != y.cost ? x.cost < y.cost : x.matches > y.matches;
  };
  std::vector<Cell> row(pred.size() + 1);
  for (std::size_t j = 0; j <= pred.size(); ++j) row[j] = {j, 0};
  for (std::size_t i = 1; i <= gt.size(); ++i) {
    Cell diag = row[0];
    row[0] = {i, 0};
    for (std::size_t j = 1; j <= pred.size(); ++j) {
      const Cell up = row[j];
      const bool eq = gt[i - 1] == pred[j - 1];
      Cell best = {diag.cost + (eq ? 0 : 1), diag.matches + (eq ? 1 : 0)};
      const Cell del = {up.cost + 1, up.matches};
      const Cell ins = {row[j - 1].cost + 1, row[j - 1].matches};
      if (better(del, best)) best = del;
      if (better(ins, best)) best = ins;
      row[j] = best;
      diag = up;
    }
  }
  return row[pred.size()].matches;
}

inline double char_precision(std::string_view gt, std::string_view pred, const NormalizeOptions& opts = {}) {
  const auto g = text::decode_utf8(normalize(gt, opts));
  const auto p = text::decode_utf8(normalize(pred, opts));
  if (g.empty()) return p.empty() ? 1.0 : 0.0;
  return static_cast<double>(aligned_matches(g, p)) / static_cast<double>(g.size());
}

struct StringMetricResult {
  double precision = 0.0;
  double ned_similarity = 1.0;
  double ned_distance = 0.0;
  std::size_t gt_len = 0;
  std::size_t pred_len = 0;

  friend bool operator==(const StringMetricResult&, const StringMetricResult&) = default;
};

/// All metrics on the normalized pair.
inline StringMetricResult evaluate_strings(std::string_view gt, std::string_view pred, const NormalizeOptions& opts = {}) {
  const auto g = text::decode_utf8(normalize(gt, opts));
  const auto p = text::decode_utf8(normalize(pred, opts));
  StringMetricResult r;
  r.gt_len = g.size();
  r.pred_len = p.size();
  r.precision = g.empty() ? (p.empty() ? 1.0 : 0.0)
                          : static_cast<double>(aligned_matches(g, p)) / static_cast<double>(g.size());
  const auto n = ned(g, p);
  r.ned_distance = n.distance;
  r.ned_similarity = n.similarity;
  return r;
}

}  // namespace zerosense::metrics

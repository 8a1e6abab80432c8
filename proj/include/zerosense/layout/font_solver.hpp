// font_solver.hpp
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
#include <cmath>
#include <string_view>

#include <spdlog/spdlog.h>

#include "zerosense/core.hpp"
#include "zerosense/layout/font_metrics.hpp"
#include "zerosense/layout/reconstruct.hpp"

namespace zerosense::layout {

inline constexpr int kMinFontSize = 8;
inline constexpr int kMaxFontSize = 100;

/// Lines needed to set `text` at `size` inside a box `box_w` wide, with the
/// buffer coefficient applied to the single-line width.
inline int required_lines(double single_line_width, double buffer, int box_w) {
  return std::max(1, static_cast<int>(std::floor(single_line_width * buffer / box_w)) + 1);
}

/// True when `text` at `size` fits the box height after wrapping.
inline bool fits(std::string_view text, int size, const BBox& bbox, const FontMetricsModel& metrics,
                 LanguageClass language) {
  const double w_sim = metrics.text_width(text, size);
  const double h_sim = metrics.line_height(size);
  const int n_req = required_lines(w_sim, metrics.buffer_coefficient(language), bbox.w);
  return n_req * h_sim <= bbox.h;
}

/// Largest integer size in [8, min(h, 100)] whose wrapped height fits the
/// box, scanning downward; 8 when nothing fits.
inline int solve_font_size(std::string_view text, const BBox& bbox, const FontMetricsModel& metrics,
                           LanguageClass language) {
  if (bbox.w <= 0 || bbox.h <= 0) throw Error("solve_font_size: non-positive bbox dimensions");
  if (text::trim(text).empty()) throw Error("solve_font_size: empty text");
  const int start = std::min(bbox.h, kMaxFontSize);
  for (int s = start; s >= kMinFontSize; --s) {
    if (fits(text, s, bbox, metrics, language)) return s;
  }
  return kMinFontSize;
}

struct ThetaOptions {
  double ascii_threshold = kDefaultAsciiThreshold;
};

/// Fills font_size, capacity and language for every block. Word-level pages
/// are first rebuilt into paragraphs; blocks with empty text are dropped.
inline PageAnnotation extract_theta(const PageAnnotation& page, const FontMetricsModel& metrics,
                                    const ThetaOptions& options = {}) {
  PageAnnotation out = page;
  if (page.granularity == Granularity::Word) {
    std::vector<TextBlock> words;
    for (const auto& b : page.blocks) {
      if (!text::trim(b.text).empty()) words.push_back(b);
    }
    if (words.empty()) throw Error("page '" + page.id + "' has no non-empty word boxes");
    out.blocks = reconstruct_paragraphs(words, page.page_w);
    out.granularity = Granularity::Paragraph;
  }

  std::vector<TextBlock> kept;
  kept.reserve(out.blocks.size());
  for (std::size_t i = 0; i < out.blocks.size(); ++i) {
    TextBlock b = out.blocks[i];
    if (text::trim(b.text).empty()) {
      spdlog::warn("page '{}' block {}: empty text, skipped", page.id, i);
      continue;
    }
    const LanguageClass lang = detect_language(b.text, options.ascii_threshold);
    b.language = lang;
    b.capacity = compute_capacity(b.text, lang);
    b.font_size = solve_font_size(b.text, b.bbox, metrics, lang);
    kept.push_back(std::move(b));
  }
  out.blocks = std::move(kept);
  return out;
}

}  // namespace zerosense::layout

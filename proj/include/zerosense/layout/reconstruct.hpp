// reconstruct.hpp
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
// Bottom-up reconstruction of paragraph boxes from word boxes.
//
//  1. H_unified is the median height of the boxes taller than 8 px.
//  2. Every box adds its height to a per-column projection profile; runs
//     below 3 H_unified that are at least 0.8 H_unified wide split columns.
//  3. Inside a column, boxes whose centres are less than 0.5 H_unified apart
//     vertically and whose horizontal gap is below 1.5 H_unified are merged.
//     That predicate joins words into lines.
//  4. Lines of one column whose horizontal extents overlap and whose vertical
//     gap is below `paragraph_gap_factor` H_unified are merged into paragraphs.
//
// Both merge stages pop boxes in input order, rescan the remaining boxes after
// every merge, and repeat until no pair is mergeable.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iterator>
#include <list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zerosense/core.hpp"

namespace zerosense::layout {

struct LayoutParams {
  double unified_line_height = 0.0;  // H_unified
  double noise_threshold = 0.0;      // 3.0 H_unified
  double min_gap = 0.0;              // 0.8 H_unified
  double merge_dy_factor = 0.5;
  double merge_dx_factor = 1.5;
  int min_box_height = 8;
  double paragraph_gap_factor = 0.5;

  static LayoutParams from_unified_height(double h_unified) {
    if (!(h_unified > 0.0)) throw Error("unified line height must be positive");
    LayoutParams p;
    p.unified_line_height = h_unified;
    p.noise_threshold = 3.0 * h_unified;
    p.min_gap = 0.8 * h_unified;
    return p;
  }
};

/// Median height of boxes taller than `min_box_height`.
inline double unified_line_height(std::span<const BBox> boxes, int min_box_height = 8) {
  std::vector<int> heights;
  for (const auto& b : boxes) {
    if (b.h > min_box_height) heights.push_back(b.h);
  }
  if (heights.empty()) throw Error("no box taller than " + std::to_string(min_box_height) + " px; H_unified undefined");
  std::sort(heights.begin(), heights.end());
  const std::size_t n = heights.size();
  return n % 2 == 1 ? heights[n / 2] : 0.5 * (heights[n / 2 - 1] + heights[n / 2]);
}

struct ProjectionProfile {
  std::vector<double> values;  // one entry per page column x
};

inline ProjectionProfile vertical_projection(std::span<const BBox> boxes, int page_w) {
  if (page_w <= 0) throw Error("page width must be positive");
  ProjectionProfile p;
  p.values.assign(static_cast<std::size_t>(page_w), 0.0);
  for (const auto& b : boxes) {
    const int x0 = std::max(b.x, 0);
    const int x1 = std::min(b.x + b.w, page_w - 1);  // inclusive, as in x_b .. x_b + w_b
    for (int x = x0; x <= x1; ++x) p.values[static_cast<std::size_t>(x)] += b.h;
  }
  return p;
}

/// Half-open pixel range [x0, x1) of one text column.
struct ColumnSpan {
  int x0 = 0;
  int x1 = 0;
  friend bool operator==(const ColumnSpan&, const ColumnSpan&) = default;
};

/// Columns are the stretches left between gaps (density below the noise
/// threshold for at least min_gap pixels). A page with no dense stretch at
/// all is treated as a single column.
inline std::vector<ColumnSpan> split_columns(const ProjectionProfile& profile, const LayoutParams& params) {
  const int w = static_cast<int>(profile.values.size());
  std::vector<bool> gap(static_cast<std::size_t>(w), false);
  int run_start = -1;
  for (int x = 0; x <= w; ++x) {
    const bool low = x < w && profile.values[static_cast<std::size_t>(x)] < params.noise_threshold;
    if (low && run_start < 0) run_start = x;
    if (!low && run_start >= 0) {
      if (x - run_start >= params.min_gap) {
        std::fill(gap.begin() + run_start, gap.begin() + x, true);
      }
      run_start = -1;
    }
  }
  std::vector<ColumnSpan> spans;
  int start = -1;
  for (int x = 0; x <= w; ++x) {
    const bool in_col = x < w && !gap[static_cast<std::size_t>(x)];
    if (in_col && start < 0) start = x;
    if (!in_col && start >= 0) {
      spans.push_back({start, x});
      start = -1;
    }
  }
  if (spans.empty()) spans.push_back({0, w});
  return spans;
}

/// Column index for each box, by horizontal centre; boxes centred in a gap go
/// to the nearest column.
inline std::vector<std::size_t> assign_columns(std::span<const BBox> boxes, std::span<const ColumnSpan> spans) {
  std::vector<std::size_t> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) {
    const double cx = b.center_x();
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const double d = cx < spans[i].x0 ? spans[i].x0 - cx : (cx >= spans[i].x1 ? cx - spans[i].x1 + 1 : 0.0);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    out.push_back(best);
  }
  return out;
}

/// Signed horizontal distance between two boxes; negative when they overlap.
[[nodiscard]] constexpr int horizontal_gap(const BBox& a, const BBox& b) noexcept {
  return std::max(a.x, b.x) - std::min(a.right(), b.right());
}

/// Signed vertical distance between two boxes; negative when they overlap.
[[nodiscard]] constexpr int vertical_gap(const BBox& a, const BBox& b) noexcept {
  return std::max(a.y, b.y) - std::min(a.bottom(), b.bottom());
}

/// Word-to-line predicate.
[[nodiscard]] inline bool same_line(const BBox& u, const BBox& v, const LayoutParams& p) {
  const double dy = std::abs(u.center_y() - v.center_y());
  const double dx = horizontal_gap(u, v);
  return dy < p.merge_dy_factor * p.unified_line_height && dx < p.merge_dx_factor * p.unified_line_height;
}

/// Line-to-paragraph predicate.
[[nodiscard]] inline bool same_paragraph(const BBox& u, const BBox& v, const LayoutParams& p) {
  return horizontal_gap(u, v) < 0 && vertical_gap(u, v) < p.paragraph_gap_factor * p.unified_line_height;
}

/// A merged box and the indices of the input boxes it covers.
struct Cluster {
  BBox box;
  std::vector<std::size_t> members;
};

/// Greedy pop/merge with rescans, repeated to a fixpoint.
template <typename Pred>
std::vector<Cluster> merge_clusters(std::vector<Cluster> items, Pred&& mergeable) {
  for (;;) {
    const std::size_t before = items.size();
    std::list<Cluster> remaining(std::make_move_iterator(items.begin()), std::make_move_iterator(items.end()));
    std::vector<Cluster> merged;
    while (!remaining.empty()) {
      Cluster u = std::move(remaining.front());
      remaining.pop_front();
      bool changed = true;
      while (changed) {
        changed = false;
        for (auto it = remaining.begin(); it != remaining.end(); ++it) {
          if (mergeable(u.box, it->box)) {
            u.box = unite(u.box, it->box);
            u.members.insert(u.members.end(), it->members.begin(), it->members.end());
            remaining.erase(it);
            changed = true;
            break;
          }
        }
      }
      merged.push_back(std::move(u));
    }
    items = std::move(merged);
    if (items.size() == before) return items;
  }
}

struct LayoutResult {
  LayoutParams params;
  std::vector<ColumnSpan> columns;  // only columns that received boxes
  std::vector<Cluster> lines;       // members index the input words
  std::vector<Cluster> paragraphs;  // members index `lines`
  std::vector<std::size_t> paragraph_column;
};

namespace detail {

inline std::vector<Cluster> singletons(std::span<const BBox> boxes, std::span<const std::size_t> indices) {
  std::vector<Cluster> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back({boxes[i], {i}});
  return out;
}

}  // namespace detail

/// Full reconstruction; `boxes` are word boxes in input order.
inline LayoutResult analyze_layout(std::span<const BBox> boxes, int page_w, std::optional<LayoutParams> params = {}) {
  if (boxes.empty()) throw Error("layout reconstruction needs at least one box");
  LayoutResult result;
  result.params = params ? *params : LayoutParams::from_unified_height(unified_line_height(boxes));
  const auto& p = result.params;

  const auto profile = vertical_projection(boxes, page_w);
  const auto spans = split_columns(profile, p);
  const auto column_of = assign_columns(boxes, spans);

  for (std::size_t c = 0; c < spans.size(); ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (column_of[i] == c) idx.push_back(i);
    }
    if (idx.empty()) continue;
    const std::size_t col = result.columns.size();
    result.columns.push_back(spans[c]);

    auto lines = merge_clusters(detail::singletons(boxes, idx),
                                [&](const BBox& u, const BBox& v) { return same_line(u, v, p); });
    for (auto& line : lines) {
      std::sort(line.members.begin(), line.members.end(), [&](std::size_t a, std::size_t b) {
        return boxes[a].x != boxes[b].x ? boxes[a].x < boxes[b].x : a < b;
      });
    }
    std::sort(lines.begin(), lines.end(), [](const Cluster& a, const Cluster& b) {
      return a.box.center_y() != b.box.center_y() ? a.box.center_y() < b.box.center_y() : a.box.x < b.box.x;
    });

    const std::size_t line_base = result.lines.size();
    std::vector<Cluster> line_clusters;
    for (std::size_t i = 0; i < lines.size(); ++i) line_clusters.push_back({lines[i].box, {line_base + i}});
    auto paragraphs = merge_clusters(std::move(line_clusters),
                                     [&](const BBox& u, const BBox& v) { return same_paragraph(u, v, p); });
    for (auto& line : lines) result.lines.push_back(std::move(line));
    for (auto& para : paragraphs) {
      std::sort(para.members.begin(), para.members.end(), [&](std::size_t a, std::size_t b) {
        const auto& la = result.lines[a].box;
        const auto& lb = result.lines[b].box;
        return la.center_y() != lb.center_y() ? la.center_y() < lb.center_y() : la.x < lb.x;
      });
    }
    std::sort(paragraphs.begin(), paragraphs.end(), [](const Cluster& a, const Cluster& b) {
      return a.box.y != b.box.y ? a.box.y < b.box.y : a.box.x < b.box.x;
    });
    for (auto& para : paragraphs) {
      result.paragraphs.push_back(std::move(para));
      result.paragraph_column.push_back(col);
    }
  }
  return result;
}

inline std::vector<BBox> boxes_of(std::span<const TextBlock> blocks) {
  std::vector<BBox> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(b.bbox);
  return out;
}

/// Text of a line cluster: member words left to right, space separated.
inline std::string line_text(const Cluster& line, std::span<const TextBlock> words) {
  std::string out;
  for (auto i : line.members) {
    if (words[i].text.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += words[i].text;
  }
  return out;
}

/// Word boxes to line blocks (reading order inside each column).
inline std::vector<TextBlock> reconstruct_lines(std::span<const TextBlock> words, int page_w) {
  const auto boxes = boxes_of(words);
  const auto layout = analyze_layout(boxes, page_w);
  std::vector<TextBlock> out;
  for (const auto& line : layout.lines) out.push_back({line.box, line_text(line, words), {}, {}, {}});
  return out;
}

/// Word boxes to paragraph blocks; text joined in reading order.
inline std::vector<TextBlock> reconstruct_paragraphs(std::span<const TextBlock> words, int page_w) {
  const auto boxes = boxes_of(words);
  const auto layout = analyze_layout(boxes, page_w);
  std::vector<TextBlock> out;
  for (const auto& para : layout.paragraphs) {
    std::string text;
    for (auto li : para.members) {
      const auto t = line_text(layout.lines[li], words);
      if (t.empty()) continue;
      if (!text.empty()) text.push_back(' ');
      text += t;
    }
    out.push_back({para.box, std::move(text), {}, {}, {}});
  }
  return out;
}

}  // namespace zerosense::layout

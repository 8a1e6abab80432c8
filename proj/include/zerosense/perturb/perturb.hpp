// perturb.hpp
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
// Word-order perturbation that keeps the page looking the same.
//
// Stage one exchanges the contents of text lines whose heights agree within
// a tolerance; the line slots themselves never move. Stage two shuffles the
// words inside each line and lays them out again from the slot's left edge,
// reusing the source line's sequence of inter-word gaps.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <spdlog/spdlog.h>

#include "zerosense/core.hpp"
#include "zerosense/layout/reconstruct.hpp"
#include "zerosense/render/image_ops.hpp"
#include "zerosense/rng.hpp"

namespace zerosense::perturb {

inline constexpr double kDefaultHeightTolerance = 0.05;
inline constexpr int kMaxPermutationAttempts = 20;

struct LineGroup {
  std::vector<std::size_t> members;  // ascending line indices
  double representative_height = 0.0;
  double tolerance = kDefaultHeightTolerance;
};

/// Two heights are compatible when they differ by at most `tolerance` of the smaller.
inline bool heights_compatible(double a, double b, double tolerance) {
  return std::abs(a - b) <= tolerance * std::min(a, b) + 1e-12;
}

/// Greedy first fit in order of descending height: a line joins the first
/// group all of whose members are compatible with it.
inline std::vector<LineGroup> group_lines(std::span<const double> heights, double tolerance = kDefaultHeightTolerance) {
  if (tolerance < 0.0) throw Error("group_lines: negative tolerance");
  std::vector<std::size_t> order(heights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return heights[a] > heights[b]; });

  std::vector<LineGroup> groups;
  for (auto i : order) {
    auto fits = [&](const LineGroup& g) {
      return std::all_of(g.members.begin(), g.members.end(),
                         [&](std::size_t m) { return heights_compatible(heights[i], heights[m], tolerance); });
    };
    const auto it = std::find_if(groups.begin(), groups.end(), fits);
    if (it != groups.end()) {
      it->members.push_back(i);
    } else {
      groups.push_back({{i}, heights[i], tolerance});
    }
  }
  for (auto& g : groups) std::sort(g.members.begin(), g.members.end());
  return groups;
}

inline std::vector<LineGroup> group_lines(std::span<const BBox> lines, double tolerance = kDefaultHeightTolerance) {
  std::vector<double> h;
  h.reserve(lines.size());
  for (const auto& b : lines) h.push_back(b.h);
  return group_lines(h, tolerance);
}

/// A text line slot and the words (page block indices, left to right) it holds.
struct PageLine {
  BBox box;
  std::vector<std::size_t> words;
};

/// Lines of a word-granularity page, in reading order per column.
inline std::vector<PageLine> extract_lines(const PageAnnotation& page) {
  if (page.granularity != Granularity::Word) throw Error("page '" + page.id + "' is not word-granularity");
  if (page.blocks.empty()) throw Error("page '" + page.id + "' has no words");
  const auto boxes = layout::boxes_of(page.blocks);
  const auto result = layout::analyze_layout(boxes, page.page_w);
  std::vector<PageLine> lines;
  lines.reserve(result.lines.size());
  for (const auto& l : result.lines) lines.push_back({l.box, l.members});
  return lines;
}

/// Left-to-right gaps between consecutive words (may be negative for overlapping boxes).
inline std::vector<int> gap_sequence(std::span<const BBox> words_in_order) {
  std::vector<int> gaps;
  for (std::size_t i = 1; i < words_in_order.size(); ++i) gaps.push_back(words_in_order[i].x - words_in_order[i - 1].right());
  return gaps;
}

/// Lays out `widths` from `x0` with the given gaps; returns the left edges.
inline std::vector<int> lay_out(int x0, std::span<const int> widths, std::span<const int> gaps) {
  std::vector<int> xs;
  int x = x0;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i > 0) x += gaps[i - 1];
    xs.push_back(x);
    x += widths[i];
  }
  return xs;
}

/// Shuffles the words of one line and re-lays them from the line's left
/// edge with the original gap sequence. Each word keeps its own size and y.
inline std::vector<TextBlock> shuffle_words_in_line(std::span<const TextBlock> line, std::uint64_t seed) {
  std::vector<TextBlock> words(line.begin(), line.end());
  if (words.size() < 2) return words;
  std::stable_sort(words.begin(), words.end(), [](const TextBlock& a, const TextBlock& b) { return a.bbox.x < b.bbox.x; });
  std::vector<BBox> boxes;
  for (const auto& w : words) boxes.push_back(w.bbox);
  const auto gaps = gap_sequence(boxes);
  const int x0 = boxes.front().x;

  std::vector<std::size_t> order(words.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng(seed).shuffle(std::span<std::size_t>(order));

  std::vector<TextBlock> out;
  std::vector<int> widths;
  for (auto i : order) {
    out.push_back(words[i]);
    widths.push_back(words[i].bbox.w);
  }
  const auto xs = lay_out(x0, widths, gaps);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].bbox.x = xs[i];
  return out;
}

/// Line-content assignment: slot i receives the words of line source[i].
struct LinePermutation {
  std::vector<std::size_t> source;
};

namespace detail {

inline long long ink_width(const PageAnnotation& page, const PageLine& line) {
  long long w = 0;
  for (auto i : line.words) w += page.blocks[i].bbox.w;
  return w;
}

}  // namespace detail

/// Samples a permutation inside every group. A draw that would leave some
/// slot narrower than the summed word widths it receives is redrawn, up to
/// kMaxPermutationAttempts times; a group with no fitting draw keeps its
/// original assignment.
inline LinePermutation permute_lines(const PageAnnotation& page, std::span<const PageLine> lines,
                                     std::span<const LineGroup> groups, std::uint64_t seed) {
  LinePermutation perm;
  perm.source.resize(lines.size());
  std::iota(perm.source.begin(), perm.source.end(), std::size_t{0});
  std::vector<char> seen(lines.size(), 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g].members;
    for (auto m : members) {
      if (m >= lines.size() || seen[m]) throw Error("permute_lines: groups do not partition the lines");
      seen[m] = 1;
    }
    if (members.size() < 2) continue;
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPermutationAttempts && !placed; ++attempt) {
      std::vector<std::size_t> drawn = members;
      CounterRng(combine_keys({seed, g, static_cast<std::uint64_t>(attempt)})).shuffle(std::span<std::size_t>(drawn));
      bool fits = true;
      for (std::size_t k = 0; k < members.size() && fits; ++k) {
        fits = detail::ink_width(page, lines[drawn[k]]) <= lines[members[k]].box.w;
      }
      if (!fits) continue;
      for (std::size_t k = 0; k < members.size(); ++k) perm.source[members[k]] = drawn[k];
      placed = true;
    }
    if (!placed) spdlog::debug("page '{}': line group {} kept in place, no fitting permutation", page.id, g);
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error("permute_lines: groups do not partition the lines");
  }
  return perm;
}

struct PerturbedPage {
  PageAnnotation page;          // word blocks at their new positions, reading order
  std::vector<PageLine> lines;  // slots (unchanged boxes) with their new word indices
  std::vector<std::size_t> origin;  // origin[i]: index of block i in the source page
};

/// Both stages on annotations only. Words arriving in a slot are bottom
/// aligned to it; when their source gap sequence would run past the slot's
/// right edge the gaps are scaled down uniformly.
inline PerturbedPage perturb_page(const PageAnnotation& page, std::uint64_t seed,
                                  double tolerance = kDefaultHeightTolerance) {
  const auto lines = extract_lines(page);
  std::vector<BBox> line_boxes;
  for (const auto& l : lines) line_boxes.push_back(l.box);
  const auto groups = group_lines(line_boxes, tolerance);
  const auto perm = permute_lines(page, lines, groups, combine_keys({seed, 1}));

  PerturbedPage out;
  out.page = page;
  out.page.blocks.clear();
  for (std::size_t slot = 0; slot < lines.size(); ++slot) {
    const PageLine& src = lines[perm.source[slot]];
    const BBox& dst = lines[slot].box;
    std::vector<TextBlock> words;
    for (auto i : src.words) words.push_back(page.blocks[i]);
    std::vector<BBox> orig_boxes;
    for (const auto& w : words) orig_boxes.push_back(w.bbox);

    // Stage two: shuffle order within the incoming line.
    std::vector<std::size_t> order(words.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng(combine_keys({seed, 2, slot})).shuffle(std::span<std::size_t>(order));

    auto gaps = gap_sequence(orig_boxes);
    std::vector<int> widths;
    for (auto k : order) widths.push_back(words[k].bbox.w);
    const long long ink = std::accumulate(widths.begin(), widths.end(), 0LL);
    const long long gap_sum = std::accumulate(gaps.begin(), gaps.end(), 0LL);
    if (ink + gap_sum > dst.w && gap_sum > 0) {
      const double scale = std::max(0.0, static_cast<double>(dst.w - ink) / static_cast<double>(gap_sum));
      for (auto& g : gaps) g = static_cast<int>(std::floor(g * scale));
    }
    const auto xs = lay_out(dst.x, widths, gaps);

    PageLine placed{dst, {}};
    for (std::size_t k = 0; k < order.size(); ++k) {
      TextBlock w = words[order[k]];
      const int from_bottom = src.box.bottom() - w.bbox.y;
      w.bbox.x = xs[k];
      w.bbox.y = std::clamp(dst.bottom() - from_bottom, 0, std::max(0, page.page_h - w.bbox.h));
      placed.words.push_back(out.page.blocks.size());
      out.origin.push_back(src.words[order[k]]);
      out.page.blocks.push_back(std::move(w));
    }
    out.lines.push_back(std::move(placed));
  }
  return out;
}

struct ShuffledSample {
  cv::Mat image;
  PerturbedPage perturbed;
};

/// `n` perturbed copies of a word-level page. Word crops from the source
/// image are pasted at their new positions over a background with every
/// word region erased. Copy k is keyed by (seed, page id, k).
inline std::vector<ShuffledSample> build_shuffled_set(const PageAnnotation& page, const cv::Mat& image, int n,
                                                      std::uint64_t seed, double tolerance = kDefaultHeightTolerance) {
  if (n < 0) throw Error("build_shuffled_set: negative permutation count");
  const cv::Mat src = render::to_bgr(image);
  if (src.cols != page.page_w || src.rows != page.page_h) {
    throw Error("page '" + page.id + "': image size does not match annotation");
  }
  const auto masks = layout::boxes_of(page.blocks);
  const cv::Mat background = render::inpaint_regions(src, masks);

  std::vector<ShuffledSample> out;
  for (int k = 0; k < n; ++k) {
    ShuffledSample s;
    s.perturbed = perturb_page(page, combine_keys({seed, fnv1a64(page.id), static_cast<std::uint64_t>(k)}), tolerance);
    s.perturbed.page.id = page.id + "_shuf" + std::to_string(k);
    s.image = background.clone();
    for (std::size_t i = 0; i < s.perturbed.page.blocks.size(); ++i) {
      const BBox& from = page.blocks[s.perturbed.origin[i]].bbox;
      const BBox& to = s.perturbed.page.blocks[i].bbox;
      const cv::Rect dst = cv::Rect(to.x, to.y, to.w, to.h) & cv::Rect(0, 0, s.image.cols, s.image.rows);
      if (dst.empty()) continue;
      src(cv::Rect(from.x + (dst.x - to.x), from.y + (dst.y - to.y), dst.width, dst.height)).copyTo(s.image(dst));
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Ground truth of a (possibly perturbed) word page: words in block order,
/// one line of output per slot.
inline std::string reading_order_text(const PerturbedPage& p) {
  std::string out;
  for (const auto& line : p.lines) {
    std::string l;
    for (auto i : line.words) {
      if (!l.empty()) l += ' ';
      l += p.page.blocks[i].text;
    }
    if (l.empty()) continue;
    if (!out.empty()) out += '\n';
    out += l;
  }
  return out;
}

}  // namespace zerosense::perturb

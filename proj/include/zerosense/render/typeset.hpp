// typeset.hpp
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
// Block typesetting. Glyphs are placed at pen positions taken from the
// font's advance table (the same numbers the font solver measured with) and
// rasterized one at a time by FreeType through OpenCV.

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/freetype.hpp>
#include <opencv2/imgproc.hpp>

#include "zerosense/core.hpp"
#include "zerosense/layout/font_metrics.hpp"
#include "zerosense/layout/font_solver.hpp"
#include "zerosense/render/theta.hpp"
#include "zerosense/unicode.hpp"

namespace zerosense::render {

class Font {
 public:
  static std::shared_ptr<const Font> load(const std::filesystem::path& path, double line_height_factor = 1.2) {
    return std::shared_ptr<const Font>(new Font(path, line_height_factor));
  }

  /// The face named by theta, or the bundled one when theta names none.
  static std::shared_ptr<const Font> for_theta(const RenderTheta& theta) {
    if (theta.font_face.empty()) return load(layout::default_font_path(), theta.line_height_factor);
    return load(theta.font_face, theta.line_height_factor);
  }

  [[nodiscard]] const layout::TrueTypeFace& face() const noexcept { return *face_; }
  [[nodiscard]] const layout::TrueTypeMetrics& metrics() const noexcept { return metrics_; }

  /// Non-space scalars the face cannot draw, in first-occurrence order.
  [[nodiscard]] std::u32string missing_glyphs(std::string_view text) const {
    std::u32string out;
    for (char32_t c : text::decode_utf8(text)) {
      if (!metrics_.has_glyph(c) && out.find(c) == std::u32string::npos) out.push_back(c);
    }
    return out;
  }

  [[nodiscard]] double advance(char32_t c, int size) const {
    return static_cast<double>(face_->advance_units(c)) * size / face_->units_per_em();
  }

  /// Draws `line` with its baseline starting at `origin` (pixel coordinates of `img`).
  void draw_line(cv::Mat& img, std::u32string_view line, cv::Point2d origin, int size,
                 const cv::Scalar& color = cv::Scalar(0, 0, 0)) const {
    std::lock_guard lock(mu_);
    double pen = origin.x;
    std::string glyph;
    for (char32_t c : line) {
      if (!text::is_space(c)) {
        glyph.clear();
        text::append_utf8(glyph, c);
        const cv::Point at(static_cast<int>(std::lround(pen)), static_cast<int>(std::lround(origin.y)));
        ft_->putText(img, glyph, at, size, color, -1, cv::LINE_AA, true);
      }
      pen += advance(c, size);
    }
  }

 private:
  Font(const std::filesystem::path& path, double line_height_factor)
      : face_(layout::TrueTypeFace::load(path)), metrics_(face_, line_height_factor) {
    ft_ = cv::freetype::createFreeType2();
    ft_->loadFontData(path.string(), 0);
  }

  std::shared_ptr<const layout::TrueTypeFace> face_;
  layout::TrueTypeMetrics metrics_;
  cv::Ptr<cv::freetype::FreeType2> ft_;
  mutable std::mutex mu_;
};

inline std::string describe_codepoints(std::u32string_view cps) {
  std::string out;
  char buf[16];
  for (char32_t c : cps) {
    if (!out.empty()) out += ", ";
    std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(c));
    out += buf;
    out += " '";
    text::append_utf8(out, c);
    out += "'";
  }
  return out;
}

/// Greedy line breaking to `max_width` pixels. Latin text breaks at spaces
/// (over-long words break between characters); logographic text breaks
/// between any two characters.
inline std::vector<std::u32string> wrap_text(std::string_view text, LanguageClass language, double max_width,
                                             int size, const Font& font) {
  std::vector<std::u32string> lines;
  std::u32string line;
  double line_w = 0.0;
  auto flush = [&] {
    if (!line.empty()) lines.push_back(line);
    line.clear();
    line_w = 0.0;
  };
  auto width_of = [&](std::u32string_view s) {
    double w = 0.0;
    for (char32_t c : s) w += font.advance(c, size);
    return w;
  };

  if (language == LanguageClass::Logographic) {
    for (char32_t c : text::decode_utf8(text)) {
      if (text::is_space(c)) continue;
      const double a = font.advance(c, size);
      if (!line.empty() && line_w + a > max_width) flush();
      line.push_back(c);
      line_w += a;
    }
    flush();
    return lines;
  }

  const double space = font.advance(U' ', size);
  for (const auto& word : text::split_words(text)) {
    const std::u32string w = text::decode_utf8(word);
    const double ww = width_of(w);
    if (!line.empty() && line_w + space + ww <= max_width) {
      line.push_back(U' ');
      line += w;
      line_w += space + ww;
      continue;
    }
    flush();
    if (ww <= max_width) {
      line = w;
      line_w = ww;
      continue;
    }
    for (char32_t c : w) {
      const double a = font.advance(c, size);
      if (!line.empty() && line_w + a > max_width) flush();
      line.push_back(c);
      line_w += a;
    }
  }
  flush();
  return lines;
}

struct TypesetResult {
  cv::Mat image;
  int font_size = 0;       // size actually used
  std::vector<std::string> lines;
  bool shrunk = false;     // greedy wrapping needed a smaller size than the solver's
  bool overflow = false;   // did not fit even at the minimum size; clipped to the box
};

/// Sets `text` inside `block.bbox` at the block's solved font size. Greedy
/// wrapping can need more lines than the solver's estimate; the size then
/// steps down until the lines fit, never below the solver's minimum.
inline TypesetResult typeset_block(const cv::Mat& canvas, const TextBlock& block, std::string_view text,
                                   const Font& font) {
  TypesetResult res;
  res.image = canvas.clone();
  if (!block.font_size) throw Error("typeset_block: block has no font_size; run analyze first");
  if (text::trim(text).empty()) {
    res.font_size = *block.font_size;
    return res;
  }
  const LanguageClass lang = block.language.value_or(detect_language(text));
  if (block.capacity) {
    const std::size_t got = compute_capacity(text, lang);
    if (got != *block.capacity) {
      throw Error("typeset_block: replacement capacity " + std::to_string(got) + " != block capacity " +
                  std::to_string(*block.capacity));
    }
  }
  if (const auto missing = font.missing_glyphs(text); !missing.empty()) {
    throw Error("font " + font.face().path().filename().string() + " lacks glyphs: " + describe_codepoints(missing));
  }

  const BBox& b = block.bbox;
  const auto& m = font.metrics();
  std::vector<std::u32string> lines;
  int size = std::max(*block.font_size, layout::kMinFontSize);
  for (;; --size) {
    lines = wrap_text(text, lang, b.w, size, font);
    if (lines.size() * m.line_height(size) <= b.h) break;
    if (size == layout::kMinFontSize) {
      res.overflow = true;
      break;
    }
  }
  res.font_size = size;
  res.shrunk = size < *block.font_size;

  const cv::Rect clip = cv::Rect(b.x, b.y, b.w, b.h) & cv::Rect(0, 0, res.image.cols, res.image.rows);
  if (clip.empty()) return res;
  cv::Mat roi = res.image(clip);
  const auto& face = font.face();
  const double upem = face.units_per_em();
  const double asc = face.ascender() * size / upem;
  const double desc = -face.descender() * size / upem;
  const double lh = m.line_height(size);
  const double pad = (lh - (asc + desc)) / 2.0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const double baseline = b.y + i * lh + pad + asc;
    font.draw_line(roi, lines[i], {static_cast<double>(b.x - clip.x), baseline - clip.y}, size);
    res.lines.push_back(text::encode_utf8(lines[i]));
  }
  return res;
}

}  // namespace zerosense::render

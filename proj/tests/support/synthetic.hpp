// synthetic.hpp
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
// Synthetic word-level pages with known paragraph layout, plus helpers for
// writing them out as corpora with rendered images.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "zerosense/zerosense.hpp"

namespace zerosense::testing {

inline const std::vector<std::string>& word_list() {
  static const std::vector<std::string> words = {
      "the",     "model",   "reads",  "page",    "text",    "with",     "layout",  "column",  "value",  "table",
      "figure",  "result",  "shows",  "method",  "data",    "from",     "each",    "line",    "word",   "image",
      "token",   "ratio",   "visual", "context", "should",  "remain",   "stable",  "under",   "small",  "changes",
      "across",  "several", "pages",  "which",   "makes",   "reading",  "harder",  "than",    "before", "because",
      "output",  "depends", "on",     "input",   "quality", "and",      "density", "of",      "the",    "source",
      "document", "system", "uses",   "simple",  "rules",   "for",      "every",   "block",   "found",  "in",
      "training", "but",    "not",    "during",  "testing", "while",    "most",    "errors",  "come",   "later"};
  return words;
}

/// Sequential draws from a counter-based generator.
class Draws {
 public:
  explicit Draws(std::uint64_t seed) : rng_(seed) {}
  int range(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng_.uniform_below(static_cast<std::uint64_t>(hi - lo + 1), n_++));
  }
  double unit() { return rng_.uniform01(n_++); }

 private:
  CounterRng rng_;
  std::uint64_t n_ = 0;
};

struct SyntheticPage {
  PageAnnotation page;            // word granularity, reading order
  std::vector<BBox> paragraphs;   // ground-truth paragraph boxes
  std::vector<std::string> paragraph_text;
  int columns = 1;
};

struct SyntheticSpec {
  int page_w = 1000;
  int page_h = 1300;
  int margin = 40;
  int column_gap = 48;
  int word_h = 20;
  int line_pitch = 26;
  int paragraph_gap = 24;  // extra space between paragraphs
  int char_w = 10;         // nominal advance used when no font is given
  int space = 8;
  int height_jitter = 0;  // per-paragraph word height varies by up to this much
};

/// Word width from the font at the size used for drawing, or the nominal advance.
inline int word_width(const std::string& w, const SyntheticSpec& spec, const render::Font* font, int size) {
  if (!font) return static_cast<int>(w.size()) * spec.char_w;
  double a = 0.0;
  for (char32_t c : text::decode_utf8(w)) a += font->advance(c, size);
  return std::max(1, static_cast<int>(std::ceil(a)));
}

inline constexpr int kSyntheticFontSize = 16;

inline SyntheticPage make_synthetic_page(const std::string& id, std::uint64_t seed, int columns,
                                         const SyntheticSpec& spec = {}, const render::Font* font = nullptr) {
  Draws d(seed);
  SyntheticPage sp;
  sp.columns = columns;
  sp.page.id = id;
  sp.page.image = "images/" + id + ".png";
  sp.page.page_w = spec.page_w;
  sp.page.page_h = spec.page_h;
  sp.page.granularity = Granularity::Word;
  const int col_w = (spec.page_w - 2 * spec.margin - (columns - 1) * spec.column_gap) / columns;
  const auto& words = word_list();

  for (int c = 0; c < columns; ++c) {
    const int x0 = spec.margin + c * (col_w + spec.column_gap);
    int y = spec.margin + d.range(0, 20);
    // Paragraphs of 2-5 lines until the column is full, as on a typeset page.
    while (true) {
      const int lines = d.range(2, 5);
      const int word_h = spec.word_h + (spec.height_jitter > 0 ? d.range(-spec.height_jitter, spec.height_jitter) : 0);
      if (y + lines * spec.line_pitch > spec.page_h - spec.margin) break;
      BBox para{};
      std::string ptext;
      bool first = true;
      for (int l = 0; l < lines; ++l) {
        const int limit = l + 1 == lines ? static_cast<int>(col_w * (0.35 + 0.5 * d.unit())) : col_w;
        int x = x0;
        bool any = false;
        while (true) {
          const std::string& w = words[static_cast<std::size_t>(d.range(0, static_cast<int>(words.size()) - 1))];
          const int ww = word_width(w, spec, font, kSyntheticFontSize);
          if (any && x + ww > x0 + limit) break;
          if (!any && ww > col_w) break;
          TextBlock b;
          b.bbox = {x, y, ww, word_h};
          b.text = w;
          para = first ? b.bbox : unite(para, b.bbox);
          first = false;
          ptext += (ptext.empty() ? "" : " ") + w;
          sp.page.blocks.push_back(std::move(b));
          x += ww + spec.space + d.range(0, 4);
          any = true;
        }
        y += spec.line_pitch;
      }
      if (!first) {
        sp.paragraphs.push_back(para);
        sp.paragraph_text.push_back(ptext);
      }
      y += spec.paragraph_gap + d.range(0, 10);
    }
  }
  return sp;
}

/// Black-on-white rendering of the page's word boxes with `font`.
inline cv::Mat draw_page(const PageAnnotation& page, const render::Font& font) {
  cv::Mat img = render::blank_canvas(page.page_w, page.page_h);
  for (const auto& b : page.blocks) {
    font.draw_line(img, text::decode_utf8(b.text), cv::Point2d(b.bbox.x, b.bbox.y + 15), kSyntheticFontSize);
  }
  return img;
}

/// Writes annotations.jsonl, corpus.json and images/ for `pages` under `dir`.
inline Corpus write_synthetic_corpus(const std::filesystem::path& dir, const std::vector<SyntheticPage>& pages,
                                     const render::Font& font, const std::string& name = "synthetic") {
  Corpus c;
  c.name = name;
  c.root = dir;
  std::filesystem::create_directories(dir / "images");
  for (const auto& sp : pages) {
    render::save_png(draw_page(sp.page, font), dir / sp.page.image);
    c.pages.push_back(sp.page);
  }
  save_corpus(c, dir);
  return c;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("zerosense_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// A few hundred lines of plain English for small oracle tests.
inline std::string small_training_text() {
  std::string out;
  const auto& w = word_list();
  Draws d(7);
  for (int line = 0; line < 400; ++line) {
    const int n = d.range(5, 14);
    for (int i = 0; i < n; ++i) {
      if (i) out += ' ';
      out += w[static_cast<std::size_t>(d.range(0, static_cast<int>(w.size()) - 1))];
    }
    out += ".\n";
  }
  return out;
}

}  // namespace zerosense::testing

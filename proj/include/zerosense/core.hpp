// core.hpp
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
// Domain types shared by every stage: boxes, text blocks, pages, corpora.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "zerosense/unicode.hpp"

namespace zerosense {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned pixel box; (x, y) is the top-left corner.
struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  [[nodiscard]] constexpr int right() const noexcept { return x + w; }
  [[nodiscard]] constexpr int bottom() const noexcept { return y + h; }
  [[nodiscard]] constexpr double center_y() const noexcept { return y + h / 2.0; }
  [[nodiscard]] constexpr double center_x() const noexcept { return x + w / 2.0; }
  [[nodiscard]] constexpr long long area() const noexcept {
    return static_cast<long long>(w) * static_cast<long long>(h);
  }
  [[nodiscard]] constexpr bool valid() const noexcept { return w > 0 && h > 0 && x >= 0 && y >= 0; }
  [[nodiscard]] constexpr bool within(int page_w, int page_h) const noexcept {
    return x >= 0 && y >= 0 && right() <= page_w && bottom() <= page_h;
  }
  [[nodiscard]] constexpr bool contains(const BBox& o) const noexcept {
    return o.x >= x && o.y >= y && o.right() <= right() && o.bottom() <= bottom();
  }

  friend constexpr bool operator==(const BBox&, const BBox&) = default;
};

/// Geometric union.
[[nodiscard]] constexpr BBox unite(const BBox& a, const BBox& b) noexcept {
  const int x0 = std::min(a.x, b.x);
  const int y0 = std::min(a.y, b.y);
  const int x1 = std::max(a.right(), b.right());
  const int y1 = std::max(a.bottom(), b.bottom());
  return {x0, y0, x1 - x0, y1 - y0};
}

[[nodiscard]] constexpr long long intersection_area(const BBox& a, const BBox& b) noexcept {
  const int w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const int h = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  return (w > 0 && h > 0) ? static_cast<long long>(w) * h : 0;
}

[[nodiscard]] constexpr double iou(const BBox& a, const BBox& b) noexcept {
  const long long inter = intersection_area(a, b);
  const long long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

enum class LanguageClass { Latin, Logographic };

inline std::string_view to_string(LanguageClass l) {
  return l == LanguageClass::Latin ? "latin" : "logographic";
}

inline LanguageClass parse_language(std::string_view s) {
  if (s == "latin") return LanguageClass::Latin;
  if (s == "logographic") return LanguageClass::Logographic;
  throw Error("unknown language class '" + std::string(s) + "'");
}

enum class Granularity { Word, Paragraph };

inline std::string_view to_string(Granularity g) { return g == Granularity::Word ? "word" : "paragraph"; }

inline Granularity parse_granularity(std::string_view s) {
  if (s == "word") return Granularity::Word;
  if (s == "paragraph") return Granularity::Paragraph;
  throw Error("unknown granularity '" + std::string(s) + "'");
}

enum class SourceStyle { FoxLike, OmniLike, Custom };

inline std::string_view to_string(SourceStyle s) {
  switch (s) {
    case SourceStyle::FoxLike: return "fox_like";
    case SourceStyle::OmniLike: return "omni_like";
    default: return "custom";
  }
}

inline SourceStyle parse_source_style(std::string_view s) {
  if (s == "fox_like") return SourceStyle::FoxLike;
  if (s == "omni_like") return SourceStyle::OmniLike;
  if (s == "custom") return SourceStyle::Custom;
  throw Error("unknown source style '" + std::string(s) + "'");
}

/// One annotated region. The optional attributes are filled by layout analysis.
struct TextBlock {
  BBox bbox;
  std::string text;
  std::optional<int> font_size;
  std::optional<std::size_t> capacity;
  std::optional<LanguageClass> language;

  friend bool operator==(const TextBlock&, const TextBlock&) = default;
};

struct PageAnnotation {
  std::string id;
  std::string image;  // as written in the manifest, relative to the corpus root
  int page_w = 0;
  int page_h = 0;
  Granularity granularity = Granularity::Paragraph;
  std::vector<TextBlock> blocks;

  friend bool operator==(const PageAnnotation&, const PageAnnotation&) = default;
};

struct Corpus {
  std::string name;
  SourceStyle source_style = SourceStyle::Custom;
  std::vector<PageAnnotation> pages;
  std::filesystem::path root;  // directory the manifest was read from; not part of equality

  [[nodiscard]] std::filesystem::path image_path(const PageAnnotation& page) const {
    const std::filesystem::path p(page.image);
    return p.is_absolute() ? p : root / p;
  }

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.name == b.name && a.source_style == b.source_style && a.pages == b.pages;
  }
};

inline constexpr double kDefaultAsciiThreshold = 0.8;

/// Latin iff the share of ASCII scalars reaches `ascii_threshold`.
inline LanguageClass detect_language(std::string_view text, double ascii_threshold = kDefaultAsciiThreshold) {
  if (ascii_threshold < 0.0 || ascii_threshold > 1.0) {
    throw Error("ascii_threshold must lie in [0, 1]");
  }
  const std::u32string cps = text::decode_utf8(text::trim(text));
  if (cps.empty()) throw Error("detect_language: empty text");
  const auto ascii = static_cast<double>(std::count_if(cps.begin(), cps.end(), text::is_ascii));
  return ascii / static_cast<double>(cps.size()) >= ascii_threshold ? LanguageClass::Latin
                                                                    : LanguageClass::Logographic;
}

/// Word count for Latin, non-whitespace character count for logographic text.
inline std::size_t compute_capacity(std::string_view text, LanguageClass language) {
  return language == LanguageClass::Latin ? text::count_words(text) : text::count_chars(text);
}

}  // namespace zerosense

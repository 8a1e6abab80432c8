// font_metrics.hpp
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
// Text measurement used by the font-size solver and the typesetter.
//
// Two models ship: an analytic monospace model (every scalar advances by a
// fixed fraction of the size) and a TrueType model that reads unhinted
// advance widths from the font's hmtx table. Both scale linearly with the
// size, so width and line height are strictly increasing in the size for
// any text with a positive advance.

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zerosense/core.hpp"
#include "zerosense/unicode.hpp"

namespace zerosense::layout {

inline constexpr double kLatinBuffer = 1.05;
inline constexpr double kLogographicBuffer = 1.01;

class FontMetricsModel {
 public:
  virtual ~FontMetricsModel() = default;

  /// Width in pixels of `text` set on a single line at `size` pixels per em.
  [[nodiscard]] virtual double text_width(std::string_view text, double size) const = 0;
  [[nodiscard]] virtual double line_height(double size) const = 0;
  [[nodiscard]] virtual bool has_glyph(char32_t) const { return true; }

  [[nodiscard]] virtual double buffer_coefficient(LanguageClass language) const {
    return language == LanguageClass::Latin ? kLatinBuffer : kLogographicBuffer;
  }
};

/// Every scalar value (spaces included) advances by `advance_factor * size`.
class MonospaceMetrics final : public FontMetricsModel {
 public:
  explicit MonospaceMetrics(double advance_factor = 0.6, double line_factor = 1.2)
      : advance_factor_(advance_factor), line_factor_(line_factor) {
    if (advance_factor <= 0.0 || line_factor <= 0.0) throw Error("monospace factors must be positive");
  }

  [[nodiscard]] double text_width(std::string_view text, double size) const override {
    return static_cast<double>(text::decode_utf8(text).size()) * advance_factor_ * size;
  }
  [[nodiscard]] double line_height(double size) const override { return line_factor_ * size; }

  [[nodiscard]] double advance_factor() const noexcept { return advance_factor_; }
  [[nodiscard]] double line_factor() const noexcept { return line_factor_; }

 private:
  double advance_factor_;
  double line_factor_;
};

/// Minimal sfnt reader: cmap (formats 4 and 12), head, hhea and hmtx.
class TrueTypeFace {
 public:
  static std::shared_ptr<const TrueTypeFace> load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open font file " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return std::make_shared<const TrueTypeFace>(std::move(data), path);
  }

  TrueTypeFace(std::vector<std::uint8_t> data, std::filesystem::path path)
      : data_(std::move(data)), path_(std::move(path)) {
    parse();
  }

  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
  [[nodiscard]] int units_per_em() const noexcept { return units_per_em_; }
  [[nodiscard]] int ascender() const noexcept { return ascender_; }
  [[nodiscard]] int descender() const noexcept { return descender_; }  // negative below baseline
  [[nodiscard]] int line_gap() const noexcept { return line_gap_; }

  /// 0 (.notdef) when the font has no glyph for `c`.
  [[nodiscard]] std::uint32_t glyph_index(char32_t c) const {
    if (c < bmp_glyphs_.size()) return bmp_glyphs_[c];
    return lookup_glyph(c);
  }

  [[nodiscard]] bool has_glyph(char32_t c) const { return glyph_index(c) != 0; }

  [[nodiscard]] int advance_units(char32_t c) const {
    if (c < bmp_advances_.size()) return bmp_advances_[c];
    return glyph_advance(glyph_index(c));
  }

 private:
  [[nodiscard]] std::uint16_t u16(std::size_t off) const {
    check(off + 2);
    return static_cast<std::uint16_t>((data_[off] << 8) | data_[off + 1]);
  }
  [[nodiscard]] std::int16_t i16(std::size_t off) const { return static_cast<std::int16_t>(u16(off)); }
  [[nodiscard]] std::uint32_t u32(std::size_t off) const {
    check(off + 4);
    return (std::uint32_t{data_[off]} << 24) | (std::uint32_t{data_[off + 1]} << 16) |
           (std::uint32_t{data_[off + 2]} << 8) | std::uint32_t{data_[off + 3]};
  }
  void check(std::size_t end) const {
    if (end > data_.size()) throw Error("truncated font file " + path_.string());
  }

  [[nodiscard]] std::optional<std::size_t> find_table(const char* tag) const {
    const std::size_t num_tables = u16(4);
    for (std::size_t i = 0; i < num_tables; ++i) {
      const std::size_t rec = 12 + 16 * i;
      check(rec + 16);
      if (std::memcmp(&data_[rec], tag, 4) == 0) return u32(rec + 8);
    }
    return std::nullopt;
  }

  void parse() {
    const auto head = find_table("head");
    const auto hhea = find_table("hhea");
    const auto hmtx = find_table("hmtx");
    const auto cmap = find_table("cmap");
    if (!head || !hhea || !hmtx || !cmap) throw Error("font lacks head/hhea/hmtx/cmap: " + path_.string());
    units_per_em_ = u16(*head + 18);
    if (units_per_em_ <= 0) throw Error("invalid unitsPerEm in " + path_.string());
    ascender_ = i16(*hhea + 4);
    descender_ = i16(*hhea + 6);
    line_gap_ = i16(*hhea + 8);
    num_hmetrics_ = u16(*hhea + 34);
    if (num_hmetrics_ == 0) throw Error("font has no horizontal metrics: " + path_.string());
    hmtx_ = *hmtx;

    // Pick the widest Unicode subtable available.
    const std::size_t n = u16(*cmap + 2);
    std::optional<std::size_t> fmt4, fmt12;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t rec = *cmap + 4 + 8 * i;
      const auto platform = u16(rec), encoding = u16(rec + 2);
      const std::size_t sub = *cmap + u32(rec + 4);
      const bool unicode = platform == 0 || (platform == 3 && (encoding == 1 || encoding == 10));
      if (!unicode) continue;
      const auto format = u16(sub);
      if (format == 12 && !fmt12) fmt12 = sub;
      if (format == 4 && !fmt4) fmt4 = sub;
    }
    if (fmt12) {
      cmap_format_ = 12;
      cmap_ = *fmt12;
    } else if (fmt4) {
      cmap_format_ = 4;
      cmap_ = *fmt4;
    } else {
      throw Error("font has no Unicode cmap (format 4 or 12): " + path_.string());
    }

    bmp_glyphs_.resize(0x10000);
    bmp_advances_.resize(0x10000);
    for (char32_t c = 0; c < 0x10000; ++c) {
      const auto g = lookup_glyph(c);
      bmp_glyphs_[c] = g;
      bmp_advances_[c] = static_cast<std::uint16_t>(glyph_advance(g));
    }
  }

  [[nodiscard]] int glyph_advance(std::uint32_t glyph) const {
    const std::size_t idx = glyph < num_hmetrics_ ? glyph : num_hmetrics_ - 1;
    return u16(hmtx_ + 4 * idx);
  }

  [[nodiscard]] std::uint32_t lookup_glyph(char32_t c) const {
    if (cmap_format_ == 12) {
      const std::uint32_t groups = u32(cmap_ + 12);
      std::size_t lo = 0, hi = groups;
      while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        const std::size_t g = cmap_ + 16 + 12 * mid;
        const auto start = u32(g), end = u32(g + 4);
        if (c < start) {
          hi = mid;
        } else if (c > end) {
          lo = mid + 1;
        } else {
          return u32(g + 8) + (c - start);
        }
      }
      return 0;
    }
    if (c > 0xFFFF) return 0;
    const std::size_t seg_count = u16(cmap_ + 6) / 2;
    const std::size_t ends = cmap_ + 14;
    const std::size_t starts = ends + 2 * seg_count + 2;
    const std::size_t deltas = starts + 2 * seg_count;
    const std::size_t ranges = deltas + 2 * seg_count;
    for (std::size_t s = 0; s < seg_count; ++s) {
      if (c > u16(ends + 2 * s)) continue;
      const auto start = u16(starts + 2 * s);
      if (c < start) return 0;
      const auto delta = u16(deltas + 2 * s);
      const auto range = u16(ranges + 2 * s);
      if (range == 0) return (c + delta) & 0xFFFFu;
      const std::size_t addr = ranges + 2 * s + range + 2 * (c - start);
      const auto glyph = u16(addr);
      return glyph == 0 ? 0 : ((glyph + delta) & 0xFFFFu);
    }
    return 0;
  }

  std::vector<std::uint8_t> data_;
  std::filesystem::path path_;
  int units_per_em_ = 0;
  int ascender_ = 0;
  int descender_ = 0;
  int line_gap_ = 0;
  std::size_t num_hmetrics_ = 0;
  std::size_t hmtx_ = 0;
  int cmap_format_ = 0;
  std::size_t cmap_ = 0;
  std::vector<std::uint32_t> bmp_glyphs_;
  std::vector<std::uint16_t> bmp_advances_;
};

/// Advance-width measurement from a real font. Missing glyphs measure as .notdef.
class TrueTypeMetrics final : public FontMetricsModel {
 public:
  explicit TrueTypeMetrics(std::shared_ptr<const TrueTypeFace> face, double line_height_factor = 1.2)
      : face_(std::move(face)), line_factor_(line_height_factor) {
    if (!face_) throw Error("TrueTypeMetrics: null face");
    if (line_factor_ <= 0.0) throw Error("line height factor must be positive");
  }

  [[nodiscard]] double text_width(std::string_view text, double size) const override {
    long long units = 0;
    for (char32_t c : text::decode_utf8(text)) units += face_->advance_units(c);
    return static_cast<double>(units) * size / face_->units_per_em();
  }
  [[nodiscard]] double line_height(double size) const override { return line_factor_ * size; }
  [[nodiscard]] bool has_glyph(char32_t c) const override { return text::is_space(c) || face_->has_glyph(c); }

  [[nodiscard]] const TrueTypeFace& face() const noexcept { return *face_; }
  [[nodiscard]] std::shared_ptr<const TrueTypeFace> shared_face() const noexcept { return face_; }

 private:
  std::shared_ptr<const TrueTypeFace> face_;
  double line_factor_;
};

/// Bundled fonts live under the asset directory configured at build time.
inline std::filesystem::path default_font_path(bool monospace = false) {
#ifdef ZEROSENSE_ASSET_DIR
  const std::filesystem::path base = ZEROSENSE_ASSET_DIR;
#else
  const std::filesystem::path base = "assets";
#endif
  return base / "fonts" / (monospace ? "DejaVuSansMono.ttf" : "DejaVuSans.ttf");
}

}  // namespace zerosense::layout

// render.hpp
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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <spdlog/spdlog.h>

#include "zerosense/core.hpp"
#include "zerosense/render/image_ops.hpp"
#include "zerosense/render/theta.hpp"
#include "zerosense/render/typeset.hpp"
#include "zerosense/rng.hpp"
#include "zerosense/unicode.hpp"

namespace zerosense::render {

inline constexpr const char* kRenderMetaName = "render_meta.jsonl";

/// Counts |C|. By default the count is the block capacity (words for Latin,
/// characters for logographic text). A subword vocabulary file (one token
/// per line) switches to greedy longest-match segmentation of every word;
/// scalars not covered by the vocabulary count as one token each.
class TextTokenCounter {
 public:
  TextTokenCounter() = default;

  static TextTokenCounter from_vocab_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open tokenizer vocabulary " + path.string());
    TextTokenCounter c;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      c.max_len_ = std::max(c.max_len_, text::decode_utf8(line).size());
      c.pieces_.insert(std::move(line));
    }
    if (c.pieces_.empty()) throw Error("tokenizer vocabulary " + path.string() + " is empty");
    c.identity_ = "subword:" + path.filename().string();
    return c;
  }

  [[nodiscard]] std::size_t count(std::string_view text, LanguageClass language) const {
    if (pieces_.empty()) return compute_capacity(text, language);
    std::size_t n = 0;
    for (const auto& word : text::split_words(text)) {
      const std::u32string cps = text::decode_utf8(word);
      std::size_t i = 0;
      while (i < cps.size()) {
        std::size_t take = 1;
        for (std::size_t len = std::min(max_len_, cps.size() - i); len > 1; --len) {
          if (pieces_.count(text::encode_utf8(std::u32string_view(cps).substr(i, len)))) {
            take = len;
            break;
          }
        }
        i += take;
        ++n;
      }
    }
    return n;
  }

  [[nodiscard]] std::size_t count(const TextBlock& block) const {
    if (pieces_.empty() && block.capacity) return *block.capacity;
    return count(block.text, block.language.value_or(detect_language(block.text)));
  }

  [[nodiscard]] std::size_t count(const PageAnnotation& page) const {
    std::size_t n = 0;
    for (const auto& b : page.blocks) {
      if (!text::trim(b.text).empty()) n += count(b);
    }
    return n;
  }

  [[nodiscard]] const std::string& identity() const noexcept { return identity_; }

 private:
  std::unordered_set<std::string> pieces_;
  std::size_t max_len_ = 1;
  std::string identity_ = "capacity";
};

struct RenderedPage {
  cv::Mat image;
  RenderTheta theta;
  std::size_t text_token_count = 0;
  int visual_token_count = 0;
  std::string source_id;
  std::uint64_t seed = 0;
};

/// rho = |C| / sum of visual tokens over the page images.
inline double compression_ratio(std::size_t text_tokens, std::span<const int> visual_tokens) {
  if (visual_tokens.empty()) throw Error("compression_ratio: no pages");
  long long total = 0;
  for (int v : visual_tokens) {
    if (v < 0) throw Error("compression_ratio: negative visual token count");
    total += v;
  }
  if (total == 0) throw Error("compression_ratio: zero visual tokens");
  return static_cast<double>(text_tokens) / static_cast<double>(total);
}

inline double compression_ratio(std::size_t text_tokens, std::span<const RenderedPage> pages) {
  std::vector<int> v;
  v.reserve(pages.size());
  for (const auto& p : pages) v.push_back(p.visual_token_count);
  return compression_ratio(text_tokens, v);
}

inline std::vector<BBox> block_masks(const PageAnnotation& page) {
  std::vector<BBox> masks;
  masks.reserve(page.blocks.size());
  for (const auto& b : page.blocks) masks.push_back(b.bbox);
  return masks;
}

/// Source (or blank) background, text regions erased, replacement text set
/// in every block, then padded to the canvas.
inline RenderedPage render_zerosense_page(const PageAnnotation& page, const std::map<std::size_t, std::string>& replacements,
                                          const RenderTheta& theta, const Font& font,
                                          const std::optional<cv::Mat>& source_image = std::nullopt,
                                          std::uint64_t seed = 0, const TextTokenCounter& counter = {}) {
  theta.validate();
  if (page.page_w <= 0 || page.page_h <= 0) throw Error("page '" + page.id + "' has non-positive dimensions");
  cv::Mat canvas;
  if (theta.background == Background::InpaintedSource) {
    if (!source_image) throw Error("page '" + page.id + "': inpainted_source background needs the source image");
    cv::Mat src = to_bgr(*source_image);
    if (src.cols != page.page_w || src.rows != page.page_h) {
      throw Error("page '" + page.id + "': image is " + std::to_string(src.cols) + "x" + std::to_string(src.rows) +
                  " but annotation says " + std::to_string(page.page_w) + "x" + std::to_string(page.page_h));
    }
    const auto masks = block_masks(page);
    canvas = masks.empty() ? src : inpaint_regions(src, masks);
  } else {
    canvas = blank_canvas(page.page_w, page.page_h);
  }

  RenderedPage out;
  for (std::size_t i = 0; i < page.blocks.size(); ++i) {
    const auto it = replacements.find(i);
    if (it == replacements.end()) {
      throw Error("page '" + page.id + "': no replacement text for block " + std::to_string(i));
    }
    try {
      auto set = typeset_block(canvas, page.blocks[i], it->second, font);
      if (set.overflow) spdlog::warn("page '{}' block {}: text clipped at the minimum font size", page.id, i);
      canvas = std::move(set.image);
    } catch (const Error& e) {
      throw Error("page '" + page.id + "' block " + std::to_string(i) + ": " + e.what());
    }
    TextBlock replaced = page.blocks[i];
    replaced.text = it->second;
    out.text_token_count += counter.count(replaced);
  }
  out.image = pad_to_canvas(canvas, theta);
  out.theta = theta;
  out.visual_token_count = theta.visual_tokens();
  out.source_id = page.id;
  out.seed = seed;
  return out;
}

/// The unmodified source page through the same padding and token accounting.
inline RenderedPage render_original_page(const PageAnnotation& page, const cv::Mat& source_image,
                                         const RenderTheta& theta, const TextTokenCounter& counter = {}) {
  theta.validate();
  RenderedPage out;
  out.image = pad_to_canvas(source_image, theta);
  out.theta = theta;
  out.text_token_count = counter.count(page);
  out.visual_token_count = theta.visual_tokens();
  out.source_id = page.id;
  return out;
}

struct RenderMeta {
  std::string id;
  ResolutionMode mode = ResolutionMode::Base;
  int visual_tokens = 0;
  std::size_t text_tokens = 0;
  std::uint64_t seed = 0;
  std::string theta_hash;

  [[nodiscard]] double ratio() const { return compression_ratio(text_tokens, std::span<const int>(&visual_tokens, 1)); }

  friend bool operator==(const RenderMeta&, const RenderMeta&) = default;
};

inline RenderMeta make_meta(const RenderedPage& page) {
  return {page.source_id, page.theta.mode, page.visual_token_count, page.text_token_count, page.seed,
          theta_hash(page.theta)};
}

/// One meta record per resolution mode; the raster is shared across modes.
inline std::vector<RenderMeta> metas_for_modes(const RenderedPage& page, std::span<const ResolutionMode> modes) {
  std::vector<RenderMeta> out;
  for (auto m : modes) {
    RenderedPage p;
    p.theta = page.theta.with_mode(m);
    p.text_token_count = page.text_token_count;
    p.visual_token_count = p.theta.visual_tokens();
    p.source_id = page.source_id;
    p.seed = page.seed;
    out.push_back(make_meta(p));
  }
  return out;
}

inline nlohmann::ordered_json meta_to_json(const RenderMeta& m) {
  return {{"id", m.id},           {"mode", to_string(m.mode)}, {"visual_tokens", m.visual_tokens},
          {"text_tokens", m.text_tokens}, {"seed", m.seed}, {"theta_hash", m.theta_hash}};
}

inline RenderMeta meta_from_json(const nlohmann::json& j) {
  RenderMeta m;
  m.id = j.at("id").get<std::string>();
  m.mode = parse_mode(j.at("mode").get<std::string>());
  m.visual_tokens = j.at("visual_tokens").get<int>();
  m.text_tokens = j.at("text_tokens").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.theta_hash = j.at("theta_hash").get<std::string>();
  if (m.visual_tokens <= 0) throw Error("render meta '" + m.id + "': visual_tokens must be positive");
  return m;
}

inline void write_meta(std::span<const RenderMeta> metas, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& m : metas) out << meta_to_json(m).dump() << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

inline std::vector<RenderMeta> read_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<RenderMeta> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(meta_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path.string() + " record " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace zerosense::render

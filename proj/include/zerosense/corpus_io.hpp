// corpus_io.hpp
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
// Annotation manifest ingestion. A corpus directory holds `annotations.jsonl`
// (one page per line) plus an optional `corpus.json` carrying the corpus name
// and source style. The theta-augmented variant adds font_size, capacity and
// language to each block.

#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "zerosense/core.hpp"

namespace zerosense {

inline constexpr const char* kManifestName = "annotations.jsonl";
inline constexpr const char* kThetaManifestName = "annotations.theta.jsonl";
inline constexpr const char* kCorpusInfoName = "corpus.json";

struct IngestOptions {
  std::string manifest = kManifestName;
  bool clip_out_of_page = true;  // false: reject boxes leaving the page
  bool check_images = true;
};

class ManifestError : public Error {
 public:
  ManifestError(std::size_t record, const std::string& what)
      : Error("manifest record " + std::to_string(record) + ": " + what), record_(record) {}
  [[nodiscard]] std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

namespace detail {

inline nlohmann::ordered_json block_to_json(const TextBlock& b) {
  nlohmann::ordered_json j;
  j["bbox"] = {b.bbox.x, b.bbox.y, b.bbox.w, b.bbox.h};
  j["text"] = b.text;
  if (b.font_size) j["font_size"] = *b.font_size;
  if (b.capacity) j["capacity"] = *b.capacity;
  if (b.language) j["language"] = std::string(to_string(*b.language));
  return j;
}

}  // namespace detail

inline nlohmann::ordered_json page_to_json(const PageAnnotation& page) {
  nlohmann::ordered_json j;
  j["id"] = page.id;
  j["image"] = page.image;
  j["page_w"] = page.page_w;
  j["page_h"] = page.page_h;
  j["granularity"] = std::string(to_string(page.granularity));
  auto blocks = nlohmann::ordered_json::array();
  for (const auto& b : page.blocks) blocks.push_back(detail::block_to_json(b));
  j["blocks"] = std::move(blocks);
  return j;
}

/// Parses one manifest line. Boxes leaving the page are clipped (or rejected
/// in strict mode); zero-size boxes are always an error.
inline PageAnnotation page_from_json(const nlohmann::json& j, std::size_t record, bool clip = true) {
  PageAnnotation page;
  try {
    page.id = j.at("id").get<std::string>();
    page.image = j.at("image").get<std::string>();
    page.page_w = j.at("page_w").get<int>();
    page.page_h = j.at("page_h").get<int>();
    page.granularity = parse_granularity(j.value("granularity", std::string("paragraph")));
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(record, e.what());
  } catch (const Error& e) {
    throw ManifestError(record, e.what());
  }
  if (page.page_w <= 0 || page.page_h <= 0) throw ManifestError(record, "non-positive page size");

  const auto& blocks = j.contains("blocks") ? j.at("blocks") : nlohmann::json::array();
  if (!blocks.is_array()) throw ManifestError(record, "'blocks' must be an array");
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& jb = blocks[bi];
    TextBlock b;
    try {
      const auto& box = jb.at("bbox");
      if (!box.is_array() || box.size() != 4) throw ManifestError(record, "block " + std::to_string(bi) + ": bbox must be [x,y,w,h]");
      b.bbox = {box[0].get<int>(), box[1].get<int>(), box[2].get<int>(), box[3].get<int>()};
      b.text = jb.at("text").get<std::string>();
      if (jb.contains("font_size")) b.font_size = jb.at("font_size").get<int>();
      if (jb.contains("capacity")) b.capacity = jb.at("capacity").get<std::size_t>();
      if (jb.contains("language")) b.language = parse_language(jb.at("language").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(record, "block " + std::to_string(bi) + ": " + e.what());
    } catch (const ManifestError&) {
      throw;
    } catch (const Error& e) {
      throw ManifestError(record, "block " + std::to_string(bi) + ": " + e.what());
    }
    if (b.bbox.w <= 0 || b.bbox.h <= 0) {
      throw ManifestError(record, "block " + std::to_string(bi) + ": bbox has non-positive size");
    }
    if (b.font_size && *b.font_size < 8) {
      throw ManifestError(record, "block " + std::to_string(bi) + ": font_size below 8");
    }
    if (!b.bbox.within(page.page_w, page.page_h)) {
      if (!clip) throw ManifestError(record, "block " + std::to_string(bi) + ": bbox outside page");
      const BBox page_box{0, 0, page.page_w, page.page_h};
      const int x0 = std::max(b.bbox.x, 0), y0 = std::max(b.bbox.y, 0);
      const int x1 = std::min(b.bbox.right(), page_box.w), y1 = std::min(b.bbox.bottom(), page_box.h);
      if (x1 <= x0 || y1 <= y0) {
        spdlog::warn("page '{}' block {}: bbox entirely outside page, rejected", page.id, bi);
        continue;
      }
      spdlog::warn("page '{}' block {}: bbox clipped to page", page.id, bi);
      b.bbox = {x0, y0, x1 - x0, y1 - y0};
    }
    page.blocks.push_back(std::move(b));
  }
  return page;
}

inline Corpus load_corpus(const std::filesystem::path& dir, const IngestOptions& options = {}) {
  const auto manifest = dir / options.manifest;
  std::ifstream in(manifest);
  if (!in) throw Error("missing manifest: " + manifest.string());

  Corpus corpus;
  corpus.root = dir;
  corpus.name = dir.filename().string();
  if (const auto info_path = dir / kCorpusInfoName; std::filesystem::exists(info_path)) {
    std::ifstream info_in(info_path);
    const auto info = nlohmann::json::parse(info_in);
    corpus.name = info.value("name", corpus.name);
    corpus.source_style = parse_source_style(info.value("source_style", std::string("custom")));
  }

  std::set<std::string> seen;
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      ++record;
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ManifestError(record, std::string("malformed JSON: ") + e.what());
    }
    PageAnnotation page = page_from_json(j, record, options.clip_out_of_page);
    if (!seen.insert(page.id).second) throw ManifestError(record, "duplicate page id '" + page.id + "'");
    if (options.check_images && !std::filesystem::exists(corpus.image_path(page))) {
      throw ManifestError(record, "image not found: " + corpus.image_path(page).string());
    }
    corpus.pages.push_back(std::move(page));
    ++record;
  }
  return corpus;
}

inline void write_manifest(const std::vector<PageAnnotation>& pages, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + file.string());
  for (const auto& p : pages) out << page_to_json(p).dump() << '\n';
  if (!out) throw Error("write failed: " + file.string());
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& dir,
                        const std::string& manifest = kManifestName) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  write_manifest(corpus.pages, dir / manifest);
  nlohmann::ordered_json info;
  info["name"] = corpus.name;
  info["source_style"] = std::string(to_string(corpus.source_style));
  std::ofstream out(dir / kCorpusInfoName, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / kCorpusInfoName).string());
  out << info.dump() << '\n';
}

/// Rewrites relative image paths so they resolve from `new_root`.
inline Corpus rebase_images(Corpus corpus, const std::filesystem::path& new_root) {
  for (auto& page : corpus.pages) {
    const auto abs = std::filesystem::absolute(corpus.image_path(page));
    page.image = std::filesystem::relative(abs, std::filesystem::absolute(new_root)).generic_string();
  }
  corpus.root = new_root;
  return corpus;
}

}  // namespace zerosense

// pipeline.hpp
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
// Corpus-level stages. Each stage reads a corpus directory and writes a new
// one; per-page work runs on a bounded pool and outputs are written in page
// order so reruns produce identical files.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "zerosense/core.hpp"
#include "zerosense/corpus_io.hpp"
#include "zerosense/layout/font_solver.hpp"
#include "zerosense/perturb/perturb.hpp"
#include "zerosense/render/image_ops.hpp"
#include "zerosense/render/render.hpp"
#include "zerosense/render/typeset.hpp"
#include "zerosense/zerotext/generate.hpp"

namespace zerosense::harness {

inline constexpr const char* kZeroTextName = "zerotext.jsonl";
inline constexpr const char* kImageDir = "images";

/// Runs f(i) for i in [0, n) on up to `jobs` threads; the first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (!stop) {
        const std::size_t i = next++;
        if (i >= n) return;
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!stop.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---- analyze ----------------------------------------------------------------

inline Corpus analyze_corpus(const Corpus& corpus, const layout::FontMetricsModel& metrics,
                             const layout::ThetaOptions& options = {}, int jobs = 4) {
  Corpus out = corpus;
  parallel_for(corpus.pages.size(), jobs,
               [&](std::size_t i) { out.pages[i] = layout::extract_theta(corpus.pages[i], metrics, options); });
  return out;
}

/// Writes annotations.theta.jsonl with image paths rebased onto `dir`.
inline void save_theta_corpus(const Corpus& analyzed, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_corpus(rebase_images(analyzed, dir), dir, kThetaManifestName);
}

inline Corpus load_theta_corpus(const std::filesystem::path& dir) {
  IngestOptions opts;
  opts.manifest = kThetaManifestName;
  Corpus c = load_corpus(dir, opts);
  for (const auto& p : c.pages) {
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
      const auto& b = p.blocks[i];
      if (!b.font_size || !b.capacity || !b.language) {
        throw Error("page '" + p.id + "' block " + std::to_string(i) + " lacks theta attributes in " + dir.string());
      }
    }
  }
  return c;
}

// ---- generate ---------------------------------------------------------------

struct PageZeroText {
  std::string id;
  std::map<std::size_t, zerotext::BlockGeneration> blocks;
};

inline std::vector<PageZeroText> generate_corpus_text(const Corpus& theta_corpus, const zerotext::ProbabilityOracle& oracle,
                                                      const zerotext::GenSpec& spec, int jobs = 4) {
  // Build every needed valid vocabulary up front so workers only read the cache.
  std::map<LanguageClass, zerotext::ValidVocab> valid;
  for (const auto& p : theta_corpus.pages) {
    for (const auto& b : p.blocks) {
      if (b.language && !valid.count(*b.language)) {
        valid.emplace(*b.language, zerotext::ValidVocab::build(oracle, *b.language));
      }
    }
  }
  std::vector<PageZeroText> out(theta_corpus.pages.size());
  parallel_for(theta_corpus.pages.size(), jobs, [&](std::size_t i) {
    const auto& page = theta_corpus.pages[i];
    auto cache = valid;  // cheap relative to generation; keeps workers independent
    out[i] = {page.id, zerotext::generate_page_text(page, oracle, cache, spec)};
  });
  return out;
}

inline void write_zero_text(std::span<const PageZeroText> pages, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& p : pages) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["blocks"] = nlohmann::ordered_json::array();
    for (const auto& [idx, g] : p.blocks) {
      j["blocks"].push_back({{"index", idx},
                             {"text", g.text},
                             {"tokens", g.generation.tokens.size()},
                             {"max_tau", g.generation.max_tau()},
                             {"fallback", g.generation.any_fallback()}});
    }
    out << j.dump() << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

/// Page id -> block index -> replacement text.
using ZeroTextMap = std::map<std::string, std::map<std::size_t, std::string>>;

inline ZeroTextMap read_zero_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  ZeroTextMap out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto& blocks = out[j.at("id").get<std::string>()];
      for (const auto& b : j.at("blocks")) blocks[b.at("index").get<std::size_t>()] = b.at("text").get<std::string>();
    } catch (const std::exception& e) {
      throw Error(path.string() + " record " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

struct ZeroTextAudit {
  std::string page_id;
  std::size_t block = 0;
  zerotext::VacuumAudit audit;
};

/// Splits block text back into oracle tokens: words for Latin, characters otherwise.
inline std::vector<std::string> block_tokens(std::string_view block_text, LanguageClass language) {
  if (language == LanguageClass::Latin) return text::split_words(block_text);
  std::vector<std::string> out;
  for (char32_t c : text::decode_utf8(block_text)) {
    if (!text::is_space(c)) out.push_back(text::encode_utf8(std::u32string(1, c)));
  }
  return out;
}

inline std::vector<ZeroTextAudit> audit_zero_text(const ZeroTextMap& texts, const zerotext::ProbabilityOracle& oracle,
                                                  double ascii_threshold = kDefaultAsciiThreshold) {
  std::vector<ZeroTextAudit> out;
  for (const auto& [id, blocks] : texts) {
    for (const auto& [idx, txt] : blocks) {
      const auto tokens = block_tokens(txt, detect_language(txt, ascii_threshold));
      if (tokens.empty()) continue;
      out.push_back({id, idx, zerotext::audit_vacuum(tokens, oracle)});
    }
  }
  return out;
}

// ---- render -----------------------------------------------------------------

struct CorpusRenderOptions {
  render::RenderTheta theta;
  std::vector<render::ResolutionMode> modes = {render::kAllModes.begin(), render::kAllModes.end()};
  std::uint64_t seed = 0;
  int jobs = 4;
  render::TextTokenCounter counter;
};

/// Annotation of a page after pad_to_canvas: boxes scaled with the content.
inline PageAnnotation scale_to_canvas(PageAnnotation page, const render::RenderTheta& theta) {
  const cv::Size content = render::padded_content_size(page.page_w, page.page_h, theta.canvas_w, theta.canvas_h);
  const double sx = static_cast<double>(content.width) / page.page_w;
  const double sy = static_cast<double>(content.height) / page.page_h;
  if (sx != 1.0 || sy != 1.0) {
    for (auto& b : page.blocks) {
      const int x0 = static_cast<int>(std::lround(b.bbox.x * sx));
      const int y0 = static_cast<int>(std::lround(b.bbox.y * sy));
      const int x1 = static_cast<int>(std::lround(b.bbox.right() * sx));
      const int y1 = static_cast<int>(std::lround(b.bbox.bottom() * sy));
      b.bbox = {x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)};
      if (b.font_size) b.font_size = std::max(1, static_cast<int>(std::lround(*b.font_size * std::min(sx, sy))));
    }
  }
  page.page_w = theta.canvas_w;
  page.page_h = theta.canvas_h;
  return page;
}

struct StagedPage {
  PageAnnotation annotation;
  std::vector<render::RenderMeta> metas;
};

/// Writes images/<id>.png and returns the page's canvas annotation and meta records.
inline StagedPage stage_page(const render::RenderedPage& rendered, const PageAnnotation& source_page,
                             const CorpusRenderOptions& opts, const std::filesystem::path& dir) {
  const std::string rel = std::string(kImageDir) + "/" + source_page.id + ".png";
  render::save_png(rendered.image, dir / rel);
  StagedPage s;
  s.annotation = scale_to_canvas(source_page, opts.theta);
  s.annotation.image = rel;
  s.metas = render::metas_for_modes(rendered, opts.modes);
  return s;
}

inline void finish_corpus(std::string name, std::span<const StagedPage> staged, const std::filesystem::path& dir) {
  Corpus c;
  c.name = std::move(name);
  c.root = dir;
  std::vector<render::RenderMeta> metas;
  for (const auto& s : staged) {
    c.pages.push_back(s.annotation);
    metas.insert(metas.end(), s.metas.begin(), s.metas.end());
  }
  save_corpus(c, dir);
  render::write_meta(metas, dir / render::kRenderMetaName);
}

inline std::optional<cv::Mat> source_if_needed(const Corpus& corpus, const PageAnnotation& page,
                                               const render::RenderTheta& theta) {
  if (theta.background != render::Background::InpaintedSource) return std::nullopt;
  return render::load_image(corpus.image_path(page));
}

/// Zero-text pages; ground truth in the written manifest is the replacement text.
inline void render_zerosense_corpus(const Corpus& theta_corpus, const ZeroTextMap& texts,
                                    const CorpusRenderOptions& opts, const std::filesystem::path& dir) {
  opts.theta.validate();
  const auto font = render::Font::for_theta(opts.theta);
  std::filesystem::create_directories(dir / kImageDir);
  std::vector<StagedPage> staged(theta_corpus.pages.size());
  parallel_for(theta_corpus.pages.size(), opts.jobs, [&](std::size_t i) {
    const auto& page = theta_corpus.pages[i];
    const auto it = texts.find(page.id);
    if (it == texts.end()) throw Error("no zero text for page '" + page.id + "'");
    const auto rendered = render::render_zerosense_page(page, it->second, opts.theta, *font,
                                                        source_if_needed(theta_corpus, page, opts.theta),
                                                        opts.seed, opts.counter);
    PageAnnotation replaced = page;
    for (auto& [idx, t] : it->second) {
      if (idx >= replaced.blocks.size()) throw Error("page '" + page.id + "': zero text for missing block");
      replaced.blocks[idx].text = t;
    }
    staged[i] = stage_page(rendered, replaced, opts, dir);
  });
  finish_corpus(theta_corpus.name + "-zerosense", staged, dir);
}

/// Source images through the same padding and token accounting.
inline void render_original_corpus(const Corpus& theta_corpus, const CorpusRenderOptions& opts,
                                   const std::filesystem::path& dir) {
  opts.theta.validate();
  std::filesystem::create_directories(dir / kImageDir);
  std::vector<StagedPage> staged(theta_corpus.pages.size());
  parallel_for(theta_corpus.pages.size(), opts.jobs, [&](std::size_t i) {
    const auto& page = theta_corpus.pages[i];
    auto rendered =
        render::render_original_page(page, render::load_image(theta_corpus.image_path(page)), opts.theta, opts.counter);
    rendered.seed = opts.seed;
    staged[i] = stage_page(rendered, page, opts, dir);
  });
  finish_corpus(theta_corpus.name + "-original", staged, dir);
}

// ---- perturb ----------------------------------------------------------------

struct PerturbOptions {
  int permutations = 5;
  double tolerance = perturb::kDefaultHeightTolerance;
};

/// `permutations` shuffled copies of every word-level page, padded like the
/// original renders so both land in the same compression bins.
inline void perturb_corpus(const Corpus& word_corpus, const PerturbOptions& popts, const CorpusRenderOptions& opts,
                           const std::filesystem::path& dir) {
  opts.theta.validate();
  std::filesystem::create_directories(dir / kImageDir);
  const std::size_t k = static_cast<std::size_t>(std::max(0, popts.permutations));
  std::vector<StagedPage> staged(word_corpus.pages.size() * k);
  parallel_for(word_corpus.pages.size(), opts.jobs, [&](std::size_t i) {
    const auto& page = word_corpus.pages[i];
    const auto samples = perturb::build_shuffled_set(page, render::load_image(word_corpus.image_path(page)),
                                                     popts.permutations, opts.seed, popts.tolerance);
    for (std::size_t j = 0; j < samples.size(); ++j) {
      render::RenderedPage rendered;
      rendered.image = render::pad_to_canvas(samples[j].image, opts.theta);
      rendered.theta = opts.theta;
      rendered.text_token_count = opts.counter.count(samples[j].perturbed.page);
      rendered.visual_token_count = opts.theta.visual_tokens();
      rendered.source_id = samples[j].perturbed.page.id;
      rendered.seed = opts.seed;
      staged[i * k + j] = stage_page(rendered, samples[j].perturbed.page, opts, dir);
    }
  });
  finish_corpus(word_corpus.name + "-shuffled", staged, dir);
}

}  // namespace zerosense::harness

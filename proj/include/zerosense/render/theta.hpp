// theta.hpp
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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include <json.hpp>

#include "zerosense/core.hpp"
#include "zerosense/rng.hpp"

namespace zerosense::render {

enum class ResolutionMode { Tiny, Small, Base, Large };

inline constexpr std::array<ResolutionMode, 4> kAllModes = {ResolutionMode::Tiny, ResolutionMode::Small,
                                                            ResolutionMode::Base, ResolutionMode::Large};

inline std::string_view to_string(ResolutionMode m) {
  switch (m) {
    case ResolutionMode::Tiny: return "tiny";
    case ResolutionMode::Small: return "small";
    case ResolutionMode::Base: return "base";
    case ResolutionMode::Large: return "large";
  }
  return "base";
}

inline ResolutionMode parse_mode(std::string_view s) {
  for (auto m : kAllModes) {
    if (to_string(m) == s) return m;
  }
  throw Error("unknown resolution mode '" + std::string(s) + "' (expected tiny|small|base|large)");
}

enum class Background { Blank, InpaintedSource };

inline std::string_view to_string(Background b) { return b == Background::Blank ? "blank" : "inpainted_source"; }

inline Background parse_background(std::string_view s) {
  if (s == "blank") return Background::Blank;
  if (s == "inpainted_source") return Background::InpaintedSource;
  throw Error("unknown background '" + std::string(s) + "' (expected blank|inpainted_source)");
}

/// Visual tokens per mode. These defaults are an assumption table, not
/// measured values; every report records the table in use.
inline std::map<ResolutionMode, int> default_visual_tokens() {
  return {{ResolutionMode::Tiny, 64}, {ResolutionMode::Small, 100}, {ResolutionMode::Base, 256}, {ResolutionMode::Large, 400}};
}

struct RenderTheta {
  int canvas_w = 1280;
  int canvas_h = 1280;
  ResolutionMode mode = ResolutionMode::Base;
  std::map<ResolutionMode, int> visual_tokens_per_mode = default_visual_tokens();
  std::string font_face;  // font file path; empty selects the bundled face
  double line_height_factor = 1.2;
  Background background = Background::Blank;

  void validate() const {
    if (canvas_w <= 0 || canvas_h <= 0) throw Error("canvas dimensions must be positive");
    if (line_height_factor <= 0.0) throw Error("line_height_factor must be positive");
    for (auto m : kAllModes) {
      const auto it = visual_tokens_per_mode.find(m);
      if (it == visual_tokens_per_mode.end() || it->second <= 0) {
        throw Error("visual token count for mode '" + std::string(to_string(m)) + "' must be positive");
      }
    }
  }

  [[nodiscard]] int visual_tokens() const { return visual_tokens_per_mode.at(mode); }

  [[nodiscard]] RenderTheta with_mode(ResolutionMode m) const {
    RenderTheta t = *this;
    t.mode = m;
    return t;
  }
};

inline nlohmann::ordered_json to_json(const RenderTheta& t) {
  nlohmann::ordered_json tokens;
  for (auto m : kAllModes) tokens[std::string(to_string(m))] = t.visual_tokens_per_mode.at(m);
  return {{"canvas_w", t.canvas_w},
          {"canvas_h", t.canvas_h},
          {"mode", to_string(t.mode)},
          {"visual_tokens_per_mode", tokens},
          {"font_face", t.font_face},
          {"line_height_factor", t.line_height_factor},
          {"background", to_string(t.background)}};
}

/// Stable hex digest of the canonical JSON form.
inline std::string theta_hash(const RenderTheta& t) {
  const auto h = fnv1a64(to_json(t).dump());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) out[15 - i] = kHex[(h >> (4 * i)) & 0xF];
  return out;
}

}  // namespace zerosense::render

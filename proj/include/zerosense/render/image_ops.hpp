// image_ops.hpp
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
// Raster helpers: text-region erasure, canvas padding and PNG IO.
// Images are 8-bit BGR throughout.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "zerosense/core.hpp"
#include "zerosense/render/theta.hpp"

namespace zerosense::render {

inline const cv::Scalar kWhite(255, 255, 255);

inline cv::Mat to_bgr(const cv::Mat& img) {
  if (img.empty()) throw Error("empty image");
  if (img.depth() != CV_8U) throw Error("only 8-bit images are supported");
  cv::Mat out;
  switch (img.channels()) {
    case 1: cv::cvtColor(img, out, cv::COLOR_GRAY2BGR); break;
    case 3: out = img.clone(); break;
    case 4: cv::cvtColor(img, out, cv::COLOR_BGRA2BGR); break;
    default: throw Error("unsupported channel count " + std::to_string(img.channels()));
  }
  return out;
}

inline cv::Mat load_image(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw Error("cannot read image " + path.string());
  return to_bgr(img);
}

inline std::vector<std::uint8_t> encode_png(const cv::Mat& img) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", img, buf, {cv::IMWRITE_PNG_COMPRESSION, 6})) throw Error("PNG encoding failed");
  return buf;
}

inline void save_png(const cv::Mat& img, const std::filesystem::path& path) {
  const auto buf = encode_png(img);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("write failed for " + path.string());
}

inline cv::Mat blank_canvas(int w, int h) { return cv::Mat(h, w, CV_8UC3, kWhite); }

/// Replaces masked pixels by linear interpolation between the nearest
/// unmasked pixels on the same row. A run touching one image edge copies the
/// single available boundary pixel. Rows masked end to end are filled by the
/// same rule along columns, between the nearest rows that have boundary data.
inline cv::Mat inpaint_regions(const cv::Mat& image, std::span<const BBox> masks) {
  cv::Mat out = to_bgr(image);
  const int w = out.cols, h = out.rows;
  cv::Mat1b mask(h, w, std::uint8_t{0});
  for (const auto& m : masks) {
    if (!m.valid() || !m.within(w, h)) {
      throw Error("inpaint mask [" + std::to_string(m.x) + "," + std::to_string(m.y) + "," + std::to_string(m.w) + "," +
                  std::to_string(m.h) + "] outside " + std::to_string(w) + "x" + std::to_string(h) + " image");
    }
    mask(cv::Rect(m.x, m.y, m.w, m.h)).setTo(1);
  }
  if (cv::countNonZero(mask) == w * h) throw Error("inpaint mask covers the whole image");

  auto lerp = [](const cv::Vec3b& a, const cv::Vec3b& b, double t) {
    cv::Vec3b v;
    for (int c = 0; c < 3; ++c) v[c] = cv::saturate_cast<std::uint8_t>(std::lround(a[c] + (b[c] - a[c]) * t));
    return v;
  };

  std::vector<char> row_open(static_cast<std::size_t>(h), 0);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* mr = mask.ptr<std::uint8_t>(y);
    auto* px = out.ptr<cv::Vec3b>(y);
    int x = 0;
    while (x < w) {
      if (!mr[x]) {
        ++x;
        continue;
      }
      const int a = x;
      while (x < w && mr[x]) ++x;
      const int b = x - 1;
      const bool has_l = a > 0, has_r = b + 1 < w;
      if (!has_l && !has_r) {
        row_open[static_cast<std::size_t>(y)] = 1;
        break;
      }
      const cv::Vec3b l = has_l ? px[a - 1] : px[b + 1];
      const cv::Vec3b r = has_r ? px[b + 1] : px[a - 1];
      const double span = static_cast<double>((b + 1) - (a - 1));
      for (int i = a; i <= b; ++i) px[i] = lerp(l, r, (i - (a - 1)) / span);
    }
  }

  // Column pass for rows with no horizontal boundary.
  int y = 0;
  while (y < h) {
    if (!row_open[static_cast<std::size_t>(y)]) {
      ++y;
      continue;
    }
    const int a = y;
    while (y < h && row_open[static_cast<std::size_t>(y)]) ++y;
    const int b = y - 1;
    const bool has_t = a > 0, has_b = b + 1 < h;
    const int top = has_t ? a - 1 : b + 1;
    const int bot = has_b ? b + 1 : a - 1;
    const double span = static_cast<double>((b + 1) - (a - 1));
    for (int x = 0; x < w; ++x) {
      const cv::Vec3b t = out.at<cv::Vec3b>(top, x);
      const cv::Vec3b u = out.at<cv::Vec3b>(bot, x);
      for (int i = a; i <= b; ++i) out.at<cv::Vec3b>(i, x) = lerp(t, u, (i - (a - 1)) / span);
    }
  }
  return out;
}

/// Content size after fitting `w`x`h` into the canvas without stretching.
inline cv::Size padded_content_size(int w, int h, int canvas_w, int canvas_h) {
  if (w <= canvas_w && h <= canvas_h) return {w, h};
  const double scale = std::min(static_cast<double>(canvas_w) / w, static_cast<double>(canvas_h) / h);
  const int nw = std::clamp(static_cast<int>(std::lround(w * scale)), 1, canvas_w);
  const int nh = std::clamp(static_cast<int>(std::lround(h * scale)), 1, canvas_h);
  return {nw, nh};
}

/// Places the image at the top-left of a white canvas, downscaling uniformly
/// first when either side exceeds the canvas.
inline cv::Mat pad_to_canvas(const cv::Mat& image, const RenderTheta& theta) {
  const cv::Mat src = to_bgr(image);
  const cv::Size content = padded_content_size(src.cols, src.rows, theta.canvas_w, theta.canvas_h);
  cv::Mat canvas = blank_canvas(theta.canvas_w, theta.canvas_h);
  if (content == src.size()) {
    src.copyTo(canvas(cv::Rect(0, 0, src.cols, src.rows)));
  } else {
    cv::Mat scaled;
    cv::resize(src, scaled, content, 0, 0, cv::INTER_AREA);
    scaled.copyTo(canvas(cv::Rect(0, 0, content.width, content.height)));
  }
  return canvas;
}

}  // namespace zerosense::render

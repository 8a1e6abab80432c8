// client.hpp
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
// OCR model clients. The stubs make the pipeline testable offline; the wire
// client talks to a chat-style vision endpoint:
//
//   POST {endpoint}
//     {"model": name, "temperature": 0,
//      "messages": [{"role": "user", "content": [
//         {"type": "text", "text": instruction},
//         {"type": "image_url", "image_url": {"url": "data:image/png;base64,..."}}]}]}
//   -> {"choices": [{"message": {"content": "..."}}]}
//
// A bearer token is read from the environment variable named in the options.

#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <thread>
#include <utility>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <httplib.h>
#include <json.hpp>

#include "zerosense/core.hpp"
#include "zerosense/rng.hpp"
#include "zerosense/unicode.hpp"

namespace zerosense::harness {

/// Raised when the endpoint cannot be reached at all; aborts an evaluation run.
class ClientUnreachable : public Error {
 public:
  using Error::Error;
};

inline constexpr const char* kDefaultInstruction = "Transcribe all text in this image.";

struct ModelRequest {
  std::string sample_id;  // page id plus resolution mode
  std::string page_id;
  std::string instruction;
  std::filesystem::path image_path;
  std::string ground_truth;  // only the echo stub looks at this
};

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  /// Must be safe to call from several threads at once.
  [[nodiscard]] virtual std::string predict(const ModelRequest& request) const = 0;
  [[nodiscard]] virtual std::string identity() const = 0;
};

/// Returns the ground truth it is handed.
class EchoStub final : public ModelClient {
 public:
  [[nodiscard]] std::string predict(const ModelRequest& r) const override { return r.ground_truth; }
  [[nodiscard]] std::string identity() const override { return "stub:echo"; }
};

class ConstantStub final : public ModelClient {
 public:
  explicit ConstantStub(std::string reply = "") : reply_(std::move(reply)) {}
  [[nodiscard]] std::string predict(const ModelRequest&) const override { return reply_; }
  [[nodiscard]] std::string identity() const override { return "stub:constant"; }

 private:
  std::string reply_;
};

/// Replays {"id", "prediction"} lines, matched on sample id first, then page id.
class FileStub final : public ModelClient {
 public:
  explicit FileStub(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open predictions file " + path.string());
    std::string line;
    std::size_t n = 0;
    std::uint64_t digest = 0;
    while (std::getline(in, line)) {
      ++n;
      if (text::trim(line).empty()) continue;
      digest = mix64(digest ^ fnv1a64(line));
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("id") || !j.contains("prediction")) {
        throw Error(path.string() + " record " + std::to_string(n) + ": expected {\"id\", \"prediction\"}");
      }
      predictions_[j["id"].get<std::string>()] = j["prediction"].get<std::string>();
    }
    identity_ = "stub:file:" + path.filename().string() + ":" + std::to_string(digest % 0xFFFFFFFFu);
  }

  [[nodiscard]] std::string predict(const ModelRequest& r) const override {
    if (auto it = predictions_.find(r.sample_id); it != predictions_.end()) return it->second;
    if (auto it = predictions_.find(r.page_id); it != predictions_.end()) return it->second;
    throw Error("no prediction for '" + r.sample_id + "'");
  }
  [[nodiscard]] std::string identity() const override { return identity_; }

 private:
  std::map<std::string, std::string> predictions_;
  std::string identity_;
};

inline std::string base64_encode(std::string_view bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::string_view::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

struct WireOptions {
  std::string endpoint;         // e.g. http://127.0.0.1:8000/v1/chat/completions
  std::string model = "ocr";
  std::string token_env = "ZEROSENSE_API_TOKEN";
  std::chrono::milliseconds timeout{120000};
  int retries = 3;
  std::chrono::milliseconds backoff{500};
};

class WireClient final : public ModelClient {
 public:
  explicit WireClient(WireOptions options) : options_(std::move(options)) {
    const auto scheme = options_.endpoint.find("://");
    if (scheme == std::string::npos) throw Error("wire client endpoint needs a scheme: " + options_.endpoint);
    const auto slash = options_.endpoint.find('/', scheme + 3);
    host_ = options_.endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : options_.endpoint.substr(slash);
    if (const char* tok = std::getenv(options_.token_env.c_str())) token_ = tok;
  }

  [[nodiscard]] std::string predict(const ModelRequest& r) const override {
    std::ifstream in(r.image_path, std::ios::binary);
    if (!in) throw Error("cannot read image " + r.image_path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    nlohmann::json body = {
        {"model", options_.model},
        {"temperature", 0},
        {"messages",
         {{{"role", "user"},
           {"content",
            {{{"type", "text"}, {"text", r.instruction}},
             {{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + base64_encode(bytes)}}}}}}}}}};
    const std::string payload = body.dump();

    std::string last_error;
    bool connected = false;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(options_.backoff * attempt);
      httplib::Client client(host_);
      client.set_connection_timeout(options_.timeout);
      client.set_read_timeout(options_.timeout);
      httplib::Headers headers;
      if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
      auto res = client.Post(path_, headers, payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      connected = true;
      if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status);
        if (res->status < 500 && res->status != 429) break;
        continue;
      }
      const auto j = nlohmann::json::parse(res->body, nullptr, false);
      try {
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const std::exception&) {
        throw Error("malformed reply from " + options_.endpoint);
      }
    }
    if (!connected) throw ClientUnreachable("model endpoint " + options_.endpoint + " unreachable: " + last_error);
    throw Error("model endpoint " + options_.endpoint + " failed: " + last_error);
  }

  [[nodiscard]] std::string identity() const override { return "wire:" + options_.model + "@" + host_; }

 private:
  WireOptions options_;
  std::string host_;
  std::string path_;
  std::string token_;
};

}  // namespace zerosense::harness

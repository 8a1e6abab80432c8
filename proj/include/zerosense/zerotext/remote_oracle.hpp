// remote_oracle.hpp
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
// Oracle backed by an external language-model server.
//
// Wire protocol (JSON over HTTP):
//   GET  {base}/vocab     -> {"tokens": [string, ...], "bos": string?}
//   POST {base}/logprobs  <- {"context": [string, ...], "full": true}
//                         <- {"context": [string, ...], "top_k": k}
//                         -> {"tokens": [string, ...], "logprobs": [double, ...]}
// In top-k mode the mass not covered by the returned tokens is spread evenly
// over the remaining vocabulary.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "zerosense/zerotext/oracle.hpp"

namespace zerosense::zerotext {

struct RemoteOracleOptions {
  int top_k = 0;  // 0 requests the full distribution
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
};

class RemoteOracle final : public ProbabilityOracle {
 public:
  explicit RemoteOracle(std::string base_url, RemoteOracleOptions options = {})
      : options_(options) {
    const auto scheme = base_url.find("://");
    const auto slash = base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    host_ = base_url.substr(0, slash);
    if (slash != std::string::npos) prefix_ = base_url.substr(slash);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();

    auto res = call([&](httplib::Client& c) { return c.Get(prefix_ + "/vocab"); });
    const auto j = nlohmann::json::parse(res, nullptr, false);
    if (j.is_discarded() || !j.contains("tokens") || !j["tokens"].is_array()) {
      throw Error("remote oracle " + host_ + ": malformed /vocab response");
    }
    vocab_ = Vocabulary(j["tokens"].get<std::vector<std::string>>());
    if (vocab_.size() == 0) throw Error("remote oracle " + host_ + ": empty vocabulary");
    if (j.contains("bos") && j["bos"].is_string()) bos_ = vocab_.id(j["bos"].get<std::string>());
    if (j.contains("special") && j["special"].is_array()) {
      for (const auto& s : j["special"]) specials_.push_back(vocab_.id(s.get<std::string>()));
    }
    if (bos_ && std::find(specials_.begin(), specials_.end(), *bos_) == specials_.end()) specials_.push_back(*bos_);
  }

  [[nodiscard]] const Vocabulary& vocabulary() const override { return vocab_; }

  void posterior(std::span<const TokenId> context, std::vector<double>& out) const override {
    nlohmann::json req;
    auto& ctx = req["context"] = nlohmann::json::array();
    for (auto id : context) ctx.push_back(vocab_.token(id));
    if (options_.top_k > 0) {
      req["top_k"] = options_.top_k;
    } else {
      req["full"] = true;
    }
    const std::string body = req.dump();
    const auto text = call([&](httplib::Client& c) { return c.Post(prefix_ + "/logprobs", body, "application/json"); });
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.contains("tokens") || !j.contains("logprobs") ||
        j["tokens"].size() != j["logprobs"].size()) {
      throw Error("remote oracle " + host_ + ": malformed /logprobs response");
    }

    const std::size_t v = vocab_.size();
    out.assign(v, 0.0);
    std::vector<char> listed(v, 0);
    std::size_t n_listed = 0;
    double mass = 0.0;
    for (std::size_t i = 0; i < j["tokens"].size(); ++i) {
      const auto id = vocab_.find(j["tokens"][i].get<std::string>());
      if (!id) continue;
      const double p = std::exp(j["logprobs"][i].get<double>());
      if (!listed[*id]) ++n_listed;
      listed[*id] = 1;
      out[*id] += p;
      mass += p;
    }
    if (n_listed < v) {
      const double residual = std::max(0.0, 1.0 - mass) / static_cast<double>(v - n_listed);
      for (std::size_t i = 0; i < v; ++i) {
        if (!listed[i]) out[i] = residual;
      }
    }
    const double total = std::accumulate(out.begin(), out.end(), 0.0);
    if (!(total > 0.0)) throw Error("remote oracle " + host_ + ": distribution has no mass");
    for (auto& p : out) p /= total;
  }

  [[nodiscard]] std::vector<TokenId> initial_context() const override {
    if (bos_) return {*bos_};
    return {};
  }
  [[nodiscard]] std::vector<TokenId> special_tokens() const override { return specials_; }

  [[nodiscard]] std::string identity() const override {
    return "remote(" + host_ + prefix_ + ",vocab=" + std::to_string(vocab_.size()) + ")";
  }

 private:
  template <typename F>
  std::string call(F&& request) const {
    std::string last_error;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
      httplib::Client client(host_);
      client.set_connection_timeout(options_.timeout);
      client.set_read_timeout(options_.timeout);
      auto res = request(client);
      if (res && res->status == 200) return res->body;
      last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    }
    throw Error("remote oracle " + host_ + " unreachable: " + last_error);
  }

  RemoteOracleOptions options_;
  std::string host_;
  std::string prefix_;
  Vocabulary vocab_;
  std::optional<TokenId> bos_;
  std::vector<TokenId> specials_;
};

}  // namespace zerosense::zerotext

// oracle.hpp
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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "zerosense/core.hpp"

namespace zerosense::zerotext {

using TokenId = std::uint32_t;

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
        throw Error("duplicate vocabulary entry '" + tokens_[i] + "'");
      }
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return tokens_.size(); }
  [[nodiscard]] const std::string& token(TokenId id) const { return tokens_.at(id); }
  [[nodiscard]] const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  [[nodiscard]] std::optional<TokenId> find(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  [[nodiscard]] TokenId id(std::string_view token) const {
    if (auto id = find(token)) return *id;
    throw Error("token '" + std::string(token) + "' not in vocabulary");
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Source of next-token posteriors P(. | context) over a fixed vocabulary.
/// Implementations must tolerate concurrent const calls.
class ProbabilityOracle {
 public:
  virtual ~ProbabilityOracle() = default;

  [[nodiscard]] virtual const Vocabulary& vocabulary() const = 0;

  /// Writes the full distribution (size == vocabulary().size()) into `out`.
  virtual void posterior(std::span<const TokenId> context, std::vector<double>& out) const = 0;

  /// Context every sequence starts from (the BOS prefix).
  [[nodiscard]] virtual std::vector<TokenId> initial_context() const { return {}; }

  /// Ids that can never be emitted (BOS/EOS and similar markers).
  [[nodiscard]] virtual std::vector<TokenId> special_tokens() const { return {}; }

  [[nodiscard]] virtual std::string identity() const = 0;
};

}  // namespace zerosense::zerotext

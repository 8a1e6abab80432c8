// ngram.hpp
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
// Interpolated Kneser-Ney n-gram model used as a probability oracle.
//
// Every line of the training text is one sentence, padded on the left with
// order-1 BOS markers and closed with EOS. The highest order uses raw counts,
// lower orders use continuation counts, and the unigram level interpolates
// with the uniform distribution, so every vocabulary entry gets non-zero mass
// and each returned distribution sums to one.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <unicode/uchar.h>

#include "zerosense/rng.hpp"
#include "zerosense/unicode.hpp"
#include "zerosense/zerotext/oracle.hpp"

namespace zerosense::zerotext {

enum class TokenUnit { Word, Character };

inline constexpr const char* kBos = "<s>";
inline constexpr const char* kEos = "</s>";

struct NgramOptions {
  int order = 3;
  TokenUnit unit = TokenUnit::Word;
  double discount = -1.0;  // < 0: estimate per order as n1 / (n1 + 2 n2)
  bool lowercase = true;
};

/// Splits one line into training tokens. Words lose leading and trailing
/// punctuation; characters are the non-whitespace scalars.
inline std::vector<std::string> tokenize(std::string_view line, const NgramOptions& options) {
  std::vector<std::string> out;
  if (options.unit == TokenUnit::Character) {
    for (char32_t c : text::decode_utf8(line)) {
      if (text::is_space(c) || !text::is_printable(c)) continue;
      std::string s;
      text::append_utf8(s, c);
      out.push_back(std::move(s));
    }
    return out;
  }
  for (const auto& raw : text::split_words(line)) {
    auto cps = text::decode_utf8(raw);
    std::size_t b = 0, e = cps.size();
    while (b < e && u_ispunct(static_cast<UChar32>(cps[b]))) ++b;
    while (e > b && u_ispunct(static_cast<UChar32>(cps[e - 1]))) --e;
    if (b == e) continue;
    std::string word = text::encode_utf8(std::u32string_view(cps).substr(b, e - b));
    out.push_back(options.lowercase ? text::ascii_lower(word) : std::move(word));
  }
  return out;
}

class NgramOracle final : public ProbabilityOracle {
 public:
  static NgramOracle train(std::istream& in, const NgramOptions& options = {}) {
    if (options.order < 1) throw Error("n-gram order must be at least 1");
    std::vector<std::vector<std::string>> sentences;
    std::set<std::string> words;
    std::uint64_t digest = 0;
    std::string line;
    while (std::getline(in, line)) {
      digest = mix64(digest ^ fnv1a64(line));
      auto toks = tokenize(line, options);
      if (toks.empty()) continue;
      for (const auto& t : toks) words.insert(t);
      sentences.push_back(std::move(toks));
    }
    if (sentences.empty()) throw Error("n-gram training text contains no tokens");
    words.erase(kBos);
    words.erase(kEos);
    std::vector<std::string> vocab{kBos, kEos};
    vocab.insert(vocab.end(), words.begin(), words.end());

    NgramOracle model(Vocabulary(std::move(vocab)), options);
    model.corpus_digest_ = digest;
    model.build(sentences);
    return model;
  }

  static NgramOracle train_file(const std::filesystem::path& path, const NgramOptions& options = {}) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open training text " + path.string());
    return train(in, options);
  }

  [[nodiscard]] const Vocabulary& vocabulary() const override { return vocab_; }

  void posterior(std::span<const TokenId> context, std::vector<double>& out) const override {
    const std::size_t v = vocab_.size();
    out.assign(v, 1.0 / static_cast<double>(v));
    for (int k = 1; k <= options_.order; ++k) {
      const auto hist_len = static_cast<std::size_t>(k - 1);
      if (context.size() < hist_len) break;
      const auto& table = tables_[static_cast<std::size_t>(k - 1)];
      const auto it = table.find(key(context.subspan(context.size() - hist_len)));
      if (it == table.end()) continue;
      const HistoryStats& h = it->second;
      const double d = discounts_[static_cast<std::size_t>(k - 1)];
      const double gamma = d * static_cast<double>(h.successors.size()) / h.total;
      for (auto& p : out) p *= gamma;
      for (const auto& [w, c] : h.successors) out[w] += std::max(c - d, 0.0) / h.total;
    }
  }

  [[nodiscard]] std::vector<TokenId> initial_context() const override {
    return std::vector<TokenId>(static_cast<std::size_t>(std::max(options_.order - 1, 1)), bos_);
  }

  [[nodiscard]] std::vector<TokenId> special_tokens() const override { return {bos_, eos_}; }

  [[nodiscard]] std::string identity() const override {
    std::ostringstream os;
    os << "ngram(order=" << options_.order << ",unit=" << (options_.unit == TokenUnit::Word ? "word" : "char")
       << ",vocab=" << vocab_.size() << ",corpus=" << std::hex << corpus_digest_ << ")";
    return os.str();
  }

  [[nodiscard]] const NgramOptions& options() const noexcept { return options_; }
  [[nodiscard]] double discount(int order) const { return discounts_.at(static_cast<std::size_t>(order - 1)); }

  /// Maps surface tokens to ids, normalizing case as during training.
  [[nodiscard]] std::vector<TokenId> encode(std::span<const std::string> tokens) const {
    std::vector<TokenId> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(vocab_.id(options_.lowercase ? text::ascii_lower(t) : t));
    return out;
  }

 private:
  struct HistoryStats {
    double total = 0.0;
    std::vector<std::pair<TokenId, double>> successors;  // sorted by id
  };
  using Key = std::u32string;

  NgramOracle(Vocabulary vocab, NgramOptions options) : vocab_(std::move(vocab)), options_(options) {
    bos_ = vocab_.id(kBos);
    eos_ = vocab_.id(kEos);
  }

  static Key key(std::span<const TokenId> ids) {
    Key k;
    k.reserve(ids.size());
    for (auto id : ids) k.push_back(static_cast<char32_t>(id));
    return k;
  }

  void build(const std::vector<std::vector<std::string>>& sentences) {
    const auto n = static_cast<std::size_t>(options_.order);
    const std::size_t pad = std::max<std::size_t>(n - 1, 1);
    std::vector<std::unordered_map<Key, double>> raw(n);
    for (const auto& s : sentences) {
      std::vector<TokenId> ids(pad, bos_);
      for (const auto& t : s) ids.push_back(vocab_.id(t));
      ids.push_back(eos_);
      for (std::size_t k = 1; k <= n; ++k) {
        // Skip grams made only of padding; they never get predicted.
        for (std::size_t end = pad; end < ids.size(); ++end) {
          if (end + 1 < k) continue;
          raw[k - 1][key(std::span<const TokenId>(ids).subspan(end + 1 - k, k))] += 1.0;
        }
      }
    }

    // Continuation counts: distinct left extensions of each lower-order gram.
    std::vector<std::unordered_map<Key, double>> value(n);
    value[n - 1] = std::move(raw[n - 1]);
    for (std::size_t k = n - 1; k >= 1; --k) {
      auto& cont = value[k - 1];
      const auto& higher = (k == n - 1) ? value[n - 1] : raw[k];
      for (const auto& [g, c] : higher) cont[g.substr(1)] += 1.0;
    }

    tables_.assign(n, {});
    discounts_.assign(n, 0.75);
    for (std::size_t k = 1; k <= n; ++k) {
      double n1 = 0, n2 = 0;
      std::map<Key, HistoryStats> grouped;
      for (const auto& [g, c] : value[k - 1]) {
        if (c == 1.0) ++n1;
        if (c == 2.0) ++n2;
        auto& h = grouped[g.substr(0, k - 1)];
        h.total += c;
        h.successors.emplace_back(static_cast<TokenId>(g.back()), c);
      }
      double d = options_.discount;
      if (d < 0.0) d = (n1 > 0 && n2 > 0) ? n1 / (n1 + 2.0 * n2) : 0.75;
      discounts_[k - 1] = std::clamp(d, 0.05, 0.95);
      auto& table = tables_[k - 1];
      table.reserve(grouped.size());
      for (auto& [h, stats] : grouped) {
        std::sort(stats.successors.begin(), stats.successors.end());
        table.emplace(h, std::move(stats));
      }
    }
  }

  Vocabulary vocab_;
  NgramOptions options_;
  TokenId bos_ = 0;
  TokenId eos_ = 0;
  std::uint64_t corpus_digest_ = 0;
  std::vector<std::unordered_map<Key, HistoryStats>> tables_;
  std::vector<double> discounts_;
};

}  // namespace zerosense::zerotext

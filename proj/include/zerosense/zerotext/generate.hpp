// generate.hpp
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
// Low-posterior token sampling and the matching posterior audit.
//
// At each step the candidate set is every admissible token whose posterior
// under the oracle is below tau. An empty set multiplies tau by the relax
// factor, up to max_relaxations times, after which the step samples
// uniformly over all admissible tokens. Draws come from a counter RNG keyed
// by (seed, step), so output does not depend on thread scheduling.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <unicode/uchar.h>

#include "zerosense/core.hpp"
#include "zerosense/rng.hpp"
#include "zerosense/unicode.hpp"
#include "zerosense/zerotext/oracle.hpp"

namespace zerosense::zerotext {

/// True when `token` is non-empty, printable, free of control characters
/// and written in `language`'s script class. Latin tokens are printable
/// ASCII without spaces and contain at least one letter. Logographic tokens
/// are single characters so that block capacity (a character count) equals
/// the number of generated tokens.
inline bool admissible_token(std::string_view token, LanguageClass language) {
  const auto cps = text::decode_utf8(token);
  if (cps.empty()) return false;
  if (language == LanguageClass::Logographic && cps.size() != 1) return false;
  bool letter = false;
  for (char32_t c : cps) {
    if (c == text::kReplacementChar || text::is_control(c) || text::is_space(c) || !text::is_printable(c)) {
      return false;
    }
    if (language == LanguageClass::Latin) {
      if (!text::is_ascii(c)) return false;
      letter = letter || u_isalpha(static_cast<UChar32>(c));
    } else {
      if (!text::is_logographic(c)) return false;
      letter = true;
    }
  }
  return letter;
}

class ValidVocab {
 public:
  ValidVocab(std::vector<TokenId> ids, LanguageClass language) : ids_(std::move(ids)), language_(language) {
    if (ids_.empty()) throw Error("empty valid vocabulary");
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }

  static ValidVocab build(const Vocabulary& vocab, LanguageClass language, std::span<const TokenId> specials = {}) {
    std::vector<TokenId> ids;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      const auto id = static_cast<TokenId>(i);
      if (std::find(specials.begin(), specials.end(), id) != specials.end()) continue;
      if (admissible_token(vocab.token(id), language)) ids.push_back(id);
    }
    if (ids.empty()) {
      throw Error("empty valid vocabulary: oracle has no admissible " + std::string(to_string(language)) + " tokens");
    }
    return ValidVocab(std::move(ids), language);
  }

  static ValidVocab build(const ProbabilityOracle& oracle, LanguageClass language) {
    const auto specials = oracle.special_tokens();
    return build(oracle.vocabulary(), language, specials);
  }

  [[nodiscard]] const std::vector<TokenId>& ids() const noexcept { return ids_; }
  [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
  [[nodiscard]] LanguageClass language() const noexcept { return language_; }
  [[nodiscard]] bool contains(TokenId id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

 private:
  std::vector<TokenId> ids_;
  LanguageClass language_;
};

struct GenSpec {
  std::size_t target_capacity = 0;
  double tau_init = 1e-6;
  int max_relaxations = 10;
  double relax_factor = 10.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(tau_init > 0.0 && tau_init < 1.0)) throw Error("tau_init must lie in (0, 1)");
    if (max_relaxations < 0) throw Error("max_relaxations must be non-negative");
    if (!(relax_factor > 1.0)) throw Error("relax_factor must exceed 1");
  }
};

struct StepLog {
  double tau = 0.0;         // threshold in force when the token was drawn
  int relaxations = 0;
  bool fallback = false;    // uniform draw over the whole valid set
  std::size_t candidates = 0;
};

struct Generation {
  std::vector<TokenId> tokens;
  std::vector<StepLog> steps;

  [[nodiscard]] double max_tau() const {
    double m = 0.0;
    for (const auto& s : steps) m = std::max(m, s.tau);
    return m;
  }
  [[nodiscard]] bool any_fallback() const {
    return std::any_of(steps.begin(), steps.end(), [](const StepLog& s) { return s.fallback; });
  }
  /// True when some step drew with tau above `threshold` or fell back.
  /// Repeated multiplication leaves tau a few ulps off powers of ten, hence the slack.
  [[nodiscard]] bool relaxed_past(double threshold) const {
    return any_fallback() || max_tau() > threshold * (1.0 + 1e-9);
  }
  [[nodiscard]] std::vector<std::string> strings(const Vocabulary& vocab) const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (auto id : tokens) out.push_back(vocab.token(id));
    return out;
  }
};

inline Generation generate_zero_text(const GenSpec& spec, const ProbabilityOracle& oracle, const ValidVocab& valid) {
  spec.validate();
  if (valid.size() == 0) throw Error("empty valid vocabulary");
  const CounterRng rng(spec.seed);
  Generation gen;
  gen.tokens.reserve(spec.target_capacity);
  gen.steps.reserve(spec.target_capacity);

  std::vector<TokenId> context = oracle.initial_context();
  std::vector<double> p;
  std::vector<TokenId> q;
  for (std::size_t t = 0; t < spec.target_capacity; ++t) {
    oracle.posterior(context, p);
    if (p.size() != oracle.vocabulary().size()) throw Error("oracle returned a distribution of the wrong size");
    StepLog log;
    double tau = spec.tau_init;
    for (int attempt = 0;; ++attempt) {
      q.clear();
      for (auto id : valid.ids()) {
        if (p[id] < tau) q.push_back(id);
      }
      log.tau = tau;
      log.relaxations = attempt;
      if (!q.empty() || attempt == spec.max_relaxations) break;
      tau *= spec.relax_factor;
    }
    const std::vector<TokenId>& pool = q.empty() ? valid.ids() : q;
    log.fallback = q.empty();
    log.candidates = pool.size();
    const TokenId w = pool[static_cast<std::size_t>(rng.uniform_below(pool.size(), t))];
    gen.tokens.push_back(w);
    gen.steps.push_back(log);
    context.push_back(w);
  }
  return gen;
}

struct VacuumAudit {
  std::vector<double> posteriors;
  double max_posterior = 0.0;

  [[nodiscard]] double fraction_below(double threshold) const {
    if (posteriors.empty()) return 0.0;
    const auto n = std::count_if(posteriors.begin(), posteriors.end(), [&](double p) { return p < threshold; });
    return static_cast<double>(n) / static_cast<double>(posteriors.size());
  }
};

/// P(w_t | w_<t) for every position under `oracle`, starting from its BOS context.
inline VacuumAudit audit_vacuum(std::span<const TokenId> tokens, const ProbabilityOracle& oracle) {
  if (tokens.empty()) throw Error("audit_vacuum: empty token sequence");
  const std::size_t v = oracle.vocabulary().size();
  VacuumAudit audit;
  audit.posteriors.reserve(tokens.size());
  std::vector<TokenId> context = oracle.initial_context();
  std::vector<double> p;
  for (auto w : tokens) {
    if (w >= v) throw Error("audit_vacuum: token id " + std::to_string(w) + " outside oracle vocabulary");
    oracle.posterior(context, p);
    audit.posteriors.push_back(p[w]);
    audit.max_posterior = std::max(audit.max_posterior, p[w]);
    context.push_back(w);
  }
  return audit;
}

inline VacuumAudit audit_vacuum(std::span<const std::string> tokens, const ProbabilityOracle& oracle) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    const auto id = oracle.vocabulary().find(t);
    if (!id) throw Error("audit_vacuum: token '" + t + "' outside oracle vocabulary");
    ids.push_back(*id);
  }
  return audit_vacuum(ids, oracle);
}

inline std::string tokens_to_block_text(std::span<const std::string> tokens, LanguageClass language) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && language == LanguageClass::Latin) out += ' ';
    out += tokens[i];
  }
  return out;
}

/// Seed for one block, derived from the run seed, page id and block index.
inline std::uint64_t block_seed(std::uint64_t seed, std::string_view page_id, std::size_t block) {
  return combine_keys({seed, fnv1a64(page_id), static_cast<std::uint64_t>(block)});
}

struct BlockGeneration {
  std::string text;
  Generation generation;
};

/// Zero text for every block of a theta-annotated page, keyed by block index.
/// Valid vocabularies are built on first use per language and cached in `valid`.
inline std::map<std::size_t, BlockGeneration> generate_page_text(const PageAnnotation& page,
                                                                 const ProbabilityOracle& oracle,
                                                                 std::map<LanguageClass, ValidVocab>& valid,
                                                                 GenSpec base) {
  std::map<std::size_t, BlockGeneration> out;
  const std::uint64_t run_seed = base.seed;
  for (std::size_t i = 0; i < page.blocks.size(); ++i) {
    const auto& b = page.blocks[i];
    if (!b.capacity || !b.language) {
      throw Error("page '" + page.id + "' block " + std::to_string(i) + " lacks capacity/language; run analyze first");
    }
    auto it = valid.find(*b.language);
    if (it == valid.end()) it = valid.emplace(*b.language, ValidVocab::build(oracle, *b.language)).first;
    GenSpec spec = base;
    spec.target_capacity = *b.capacity;
    spec.seed = block_seed(run_seed, page.id, i);
    BlockGeneration g;
    g.generation = generate_zero_text(spec, oracle, it->second);
    const auto words = g.generation.strings(oracle.vocabulary());
    g.text = tokens_to_block_text(words, *b.language);
    out.emplace(i, std::move(g));
  }
  return out;
}

}  // namespace zerosense::zerotext

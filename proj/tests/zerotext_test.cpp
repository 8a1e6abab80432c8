// zerotext_test.cpp
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

#include <gtest/gtest.h>

#include <numeric>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "support/synthetic.hpp"
#include "zerosense/zerosense.hpp"

namespace zerosense::zerotext {
namespace {

/// Same distribution for every context.
class FixedOracle final : public ProbabilityOracle {
 public:
  FixedOracle(std::vector<std::string> tokens, std::vector<double> p) : vocab_(std::move(tokens)), p_(std::move(p)) {}
  [[nodiscard]] const Vocabulary& vocabulary() const override { return vocab_; }
  void posterior(std::span<const TokenId>, std::vector<double>& out) const override { out = p_; }
  [[nodiscard]] std::string identity() const override { return "fixed"; }

 private:
  Vocabulary vocab_;
  std::vector<double> p_;
};

const NgramOracle& small_oracle() {
  static const NgramOracle o = [] {
    std::istringstream in(testing::small_training_text());
    return NgramOracle::train(in);
  }();
  return o;
}

TEST(Tokenize, WordsAndCharacters) {
  NgramOptions w;
  EXPECT_EQ(tokenize("Hello, World! (it's)", w), (std::vector<std::string>{"hello", "world", "it's"}));
  NgramOptions c;
  c.unit = TokenUnit::Character;
  EXPECT_EQ(tokenize("中 文", c), (std::vector<std::string>{"中", "文"}));
}

TEST(Ngram, PosteriorIsAProperDistribution) {
  const auto& o = small_oracle();
  std::vector<double> p;
  for (const auto& ctx : {std::vector<std::string>{}, std::vector<std::string>{"the"},
                          std::vector<std::string>{"the", "model"}, std::vector<std::string>{"zzz", "qqq"}}) {
    auto ids = o.initial_context();
    for (const auto& t : ctx) {
      if (auto id = o.vocabulary().find(t)) ids.push_back(*id);
    }
    o.posterior(ids, p);
    ASSERT_EQ(p.size(), o.vocabulary().size());
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    for (double v : p) EXPECT_GT(v, 0.0);
  }
}

TEST(Ngram, SeenContinuationBeatsUnseen) {
  std::istringstream in("a b c\na b c\na b c\na b d\n");
  NgramOptions opts;
  opts.order = 3;
  const auto o = NgramOracle::train(in, opts);
  std::vector<double> p;
  auto ctx = o.initial_context();
  ctx.push_back(o.vocabulary().id("a"));
  ctx.push_back(o.vocabulary().id("b"));
  o.posterior(ctx, p);
  const auto c = o.vocabulary().id("c"), d = o.vocabulary().id("d"), a = o.vocabulary().id("a");
  EXPECT_GT(p[c], p[d]);
  EXPECT_GT(p[d], p[a]);
  EXPECT_GT(p[c], 0.5);
}

TEST(Ngram, TrainingIsDeterministic) {
  std::istringstream a(testing::small_training_text()), b(testing::small_training_text());
  const auto x = NgramOracle::train(a), y = NgramOracle::train(b);
  EXPECT_EQ(x.vocabulary().tokens(), y.vocabulary().tokens());
  std::vector<double> px, py;
  x.posterior(x.initial_context(), px);
  y.posterior(y.initial_context(), py);
  EXPECT_EQ(px, py);
}

TEST(ValidVocab, ScriptFilter) {
  EXPECT_TRUE(admissible_token("word", LanguageClass::Latin));
  EXPECT_TRUE(admissible_token("it's", LanguageClass::Latin));
  EXPECT_FALSE(admissible_token("123", LanguageClass::Latin));
  EXPECT_FALSE(admissible_token("café", LanguageClass::Latin));
  EXPECT_FALSE(admissible_token("<s>\x01", LanguageClass::Latin));
  EXPECT_TRUE(admissible_token("文", LanguageClass::Logographic));
  EXPECT_FALSE(admissible_token("文本", LanguageClass::Logographic));
  EXPECT_FALSE(admissible_token("a", LanguageClass::Logographic));
  const auto v = ValidVocab::build(small_oracle(), LanguageClass::Latin);
  for (auto id : small_oracle().special_tokens()) EXPECT_FALSE(v.contains(id));
}

TEST(Generate, EveryStepRespectsItsThreshold) {
  const auto& o = small_oracle();
  const auto valid = ValidVocab::build(o, LanguageClass::Latin);
  GenSpec spec;
  spec.target_capacity = 300;
  spec.tau_init = 0.05;  // high enough that the small vocabulary has candidates
  spec.seed = 4;
  const auto g = generate_zero_text(spec, o, valid);
  ASSERT_EQ(g.tokens.size(), 300u);
  const auto audit = audit_vacuum(g.tokens, o);
  for (std::size_t t = 0; t < g.tokens.size(); ++t) {
    EXPECT_TRUE(valid.contains(g.tokens[t]));
    if (!g.steps[t].fallback) {
      EXPECT_LT(audit.posteriors[t], g.steps[t].tau);
    }
  }
  EXPECT_EQ(generate_zero_text(spec, o, valid).tokens, g.tokens);
  spec.seed = 5;
  EXPECT_NE(generate_zero_text(spec, o, valid).tokens, g.tokens);
}

TEST(Generate, RelaxesThenFallsBack) {
  const FixedOracle o({"aa", "bb", "cc", "dd"}, {0.25, 0.25, 0.25, 0.25});
  const auto valid = ValidVocab::build(o, LanguageClass::Latin);
  GenSpec spec;
  spec.target_capacity = 3;
  spec.tau_init = 1e-6;
  auto g = generate_zero_text(spec, o, valid);
  // 1e-6 * 10^6 = 1 is the first threshold above 0.25.
  EXPECT_EQ(g.steps[0].relaxations, 6);
  EXPECT_NEAR(g.steps[0].tau, 1.0, 1e-9);
  EXPECT_FALSE(g.any_fallback());
  EXPECT_TRUE(g.relaxed_past(1e-5));
  spec.max_relaxations = 2;
  g = generate_zero_text(spec, o, valid);
  EXPECT_TRUE(g.any_fallback());
  EXPECT_EQ(g.steps[0].candidates, 4u);
}

TEST(Generate, PageBlocksMatchCapacity) {
  const auto sp = testing::make_synthetic_page("g", 2, 2);
  const auto page = layout::extract_theta(sp.page, layout::MonospaceMetrics());
  std::map<LanguageClass, ValidVocab> cache;
  GenSpec spec;
  spec.seed = 9;
  const auto out = generate_page_text(page, small_oracle(), cache, spec);
  ASSERT_EQ(out.size(), page.blocks.size());
  for (const auto& [i, g] : out) {
    EXPECT_EQ(text::count_words(g.text), *page.blocks[i].capacity);
  }
  EXPECT_EQ(cache.size(), 1u);
}

TEST(Audit, NaturalTextScoresHigh) {
  const auto& o = small_oracle();
  const std::vector<std::string> toks = tokenize("the model reads page text", o.options());
  EXPECT_GT(audit_vacuum(toks, o).max_posterior, 1e-2);
  const std::vector<std::string> bad = {"notaword"};
  EXPECT_THROW(audit_vacuum(bad, o), Error);
}

TEST(RemoteOracle, WireRoundTrip) {
  httplib::Server server;
  const std::vector<std::string> vocab = {"<s>", "alpha", "beta", "gamma"};
  server.Get("/v1/vocab", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(nlohmann::json{{"tokens", vocab}, {"bos", "<s>"}}.dump(), "application/json");
  });
  server.Post("/v1/logprobs", [&](const httplib::Request& req, httplib::Response& res) {
    const auto j = nlohmann::json::parse(req.body);
    const bool after_alpha = !j["context"].empty() && j["context"].back() == "alpha";
    nlohmann::json out;
    if (j.contains("top_k")) {
      out = {{"tokens", {"beta"}}, {"logprobs", {std::log(0.7)}}};
    } else {
      const double pb = after_alpha ? 0.6 : 0.1;
      out = {{"tokens", {"<s>", "alpha", "beta", "gamma"}},
             {"logprobs", {std::log(0.1), std::log(0.2), std::log(pb), std::log(0.7 - pb)}}};
    }
    res.set_content(out.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  {
    const RemoteOracle full("http://127.0.0.1:" + std::to_string(port) + "/v1/");
    EXPECT_EQ(full.vocabulary().size(), 4u);
    EXPECT_EQ(full.initial_context(), std::vector<TokenId>{0});
    std::vector<double> p;
    const std::vector<TokenId> ctx = {0, 1};
    full.posterior(ctx, p);
    EXPECT_NEAR(p[2], 0.6, 1e-12);
    const auto valid = ValidVocab::build(full, LanguageClass::Latin);
    EXPECT_FALSE(valid.contains(0));

    RemoteOracleOptions k;
    k.top_k = 1;
    const RemoteOracle topk("http://127.0.0.1:" + std::to_string(port) + "/v1", k);
    topk.posterior(ctx, p);
    EXPECT_NEAR(p[2], 0.7, 1e-12);
    EXPECT_NEAR(p[1], 0.1, 1e-12);  // residual 0.3 over the three unlisted tokens
  }
  server.stop();
  t.join();

  RemoteOracleOptions quick;
  quick.timeout = std::chrono::milliseconds(200);
  quick.retries = 0;
  EXPECT_THROW(RemoteOracle("http://127.0.0.1:" + std::to_string(port), quick), Error);
}

}  // namespace
}  // namespace zerosense::zerotext

// harness_test.cpp
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

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "support/synthetic.hpp"
#include "zerosense/zerosense.hpp"

namespace zerosense::harness {
namespace {

EvalRecord rec(const std::string& page, double rho, double precision, const std::string& model = "m") {
  EvalRecord r;
  r.page_id = page;
  r.sample_id = page + "@base";
  r.rho = rho;
  r.model = model;
  r.metrics.precision = precision;
  r.metrics.ned_distance = 1.0 - precision;
  return r;
}

std::vector<EvalSample> samples(int n, const std::filesystem::path& image = {}) {
  std::vector<EvalSample> out;
  for (int i = 0; i < n; ++i) {
    EvalSample s;
    s.page_id = "p" + std::to_string(i);
    s.sample_id = sample_id(s.page_id, render::ResolutionMode::Base);
    s.rho = 5.0;
    s.ground_truth = "text " + std::to_string(i);
    s.image_path = image;
    out.push_back(s);
  }
  return out;
}

class CountingStub final : public ModelClient {
 public:
  mutable std::atomic<int> calls{0};
  [[nodiscard]] std::string predict(const ModelRequest& r) const override {
    ++calls;
    return r.ground_truth;
  }
  [[nodiscard]] std::string identity() const override { return "stub:count"; }
};

TEST(Stubs, EchoConstantFile) {
  ModelRequest r{"a@base", "a", "read", {}, "hello"};
  EXPECT_EQ(EchoStub().predict(r), "hello");
  EXPECT_EQ(ConstantStub("x").predict(r), "x");
  const auto dir = testing::scratch_dir("filestub");
  std::ofstream(dir / "pred.jsonl") << R"({"id":"a@base","prediction":"one"})" "\n"
                                    << R"({"id":"b","prediction":"two"})" "\n";
  const FileStub f(dir / "pred.jsonl");
  EXPECT_EQ(f.predict(r), "one");
  EXPECT_EQ(f.predict({"b@tiny", "b", "read", {}, ""}), "two");
  EXPECT_THROW(f.predict({"c@base", "c", "read", {}, ""}), Error);
  EXPECT_EQ(f.identity().rfind("stub:file:pred.jsonl:", 0), 0u);
}

TEST(Base64, KnownVectors) {
  EXPECT_EQ(base64_encode(""), "");
  EXPECT_EQ(base64_encode("f"), "Zg==");
  EXPECT_EQ(base64_encode("fo"), "Zm8=");
  EXPECT_EQ(base64_encode("foo"), "Zm9v");
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
}

TEST(Eval, RecordsSortedWithMetrics) {
  const auto recs = run_eval(samples(12), EchoStub());
  ASSERT_EQ(recs.size(), 12u);
  for (std::size_t i = 1; i < recs.size(); ++i) EXPECT_LT(recs[i - 1].page_id, recs[i].page_id);
  for (const auto& r : recs) {
    EXPECT_DOUBLE_EQ(r.metrics.precision, 1.0);
    EXPECT_EQ(r.model, "stub:echo");
  }
  const auto empty = run_eval(samples(3), ConstantStub(""));
  for (const auto& r : empty) EXPECT_DOUBLE_EQ(r.metrics.precision, 0.0);
}

TEST(Eval, ResumeSkipsFinishedSamplesAndTornLines) {
  const auto dir = testing::scratch_dir("resume");
  EvalOptions opts;
  opts.output = dir / "records.jsonl";
  CountingStub stub;
  auto all = samples(6);
  std::vector<EvalSample> first(all.begin(), all.begin() + 4);
  run_eval(first, stub, opts);
  EXPECT_EQ(stub.calls, 4);
  // Simulate a crash mid-write.
  std::ofstream(*opts.output, std::ios::app) << R"({"sample_id":"p5@base","page)";
  const auto recs = run_eval(all, stub, opts);
  EXPECT_EQ(stub.calls, 6);
  EXPECT_EQ(recs.size(), 6u);
  EXPECT_EQ(read_records(*opts.output).size(), 6u);
  opts.resume = false;
  run_eval(all, stub, opts);
  EXPECT_EQ(stub.calls, 12);
  EXPECT_EQ(read_records(*opts.output).size(), 6u);
}

TEST(Eval, RecordJsonRoundTrip) {
  auto r = rec("p", 7.25, 0.5);
  r.prediction = "x\ny";
  r.ground_truth = "gt";
  r.error = "boom";
  r.dataset = DatasetTag::Shuffled;
  EXPECT_EQ(record_from_json(nlohmann::json::parse(record_to_json(r).dump())), r);
}

TEST(Wire, RequestShapeRetriesAndErrors) {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string auth, body;
  server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 503;
      return;
    }
    auth = req.get_header_value("Authorization");
    body = req.body;
    res.set_content(R"({"choices":[{"message":{"content":"read text"}}]})", "application/json");
  });
  server.Post("/v1/bad", [&](const httplib::Request&, httplib::Response& res) { res.status = 400; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const auto dir = testing::scratch_dir("wire");
  std::ofstream(dir / "img.png", std::ios::binary) << "foo";
  ::setenv("ZEROSENSE_TEST_TOKEN", "secret", 1);
  WireOptions o;
  o.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
  o.model = "reader";
  o.token_env = "ZEROSENSE_TEST_TOKEN";
  o.backoff = std::chrono::milliseconds(1);
  const WireClient client(o);
  EXPECT_EQ(client.predict({"s", "p", "Transcribe.", dir / "img.png", ""}), "read text");
  EXPECT_EQ(hits, 2);
  EXPECT_EQ(auth, "Bearer secret");
  const auto j = nlohmann::json::parse(body);
  EXPECT_EQ(j["model"], "reader");
  EXPECT_EQ(j["messages"][0]["content"][0]["text"], "Transcribe.");
  EXPECT_EQ(j["messages"][0]["content"][1]["image_url"]["url"], "data:image/png;base64,Zm9v");

  o.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/bad";
  EXPECT_THROW(WireClient(o).predict({"s", "p", "x", dir / "img.png", ""}), Error);
  // A 4xx is recorded as a failed sample, not an abort.
  const auto recs = run_eval(samples(1, dir / "img.png"), WireClient(o));
  EXPECT_FALSE(recs[0].error.empty());
  server.stop();
  t.join();

  o.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
  o.retries = 1;
  o.timeout = std::chrono::milliseconds(200);
  EXPECT_THROW(WireClient(o).predict({"s", "p", "x", dir / "img.png", ""}), ClientUnreachable);
  EXPECT_THROW(run_eval(samples(3, dir / "img.png"), WireClient(o)), ClientUnreachable);
}

TEST(Sweep, BinsAreHalfOpenAndDisjoint) {
  SweepConfig c;
  EXPECT_EQ(c.bin_of(6.25), std::optional<std::size_t>(2));
  EXPECT_EQ(c.bin_of(6.2499), std::optional<std::size_t>(1));
  EXPECT_FALSE(c.bin_of(1.0));
  EXPECT_FALSE(c.bin_of(18.75));
  c.bins = {{5.0, 2.0}, {7.0, 1.5}};
  EXPECT_THROW(c.validate(), Error);
}

TEST(Decouple, PerBinMeansAndFlags) {
  SweepConfig c;
  c.bins = {{5.0, 1.25}, {10.0, 1.25}, {15.0, 1.25}};
  metrics::LinearCalibration cal;
  cal.intercept = 1.0;
  cal.slope = -0.05;  // 0.75 at 5, 0.5 at 10
  const std::vector<EvalRecord> full = {rec("a", 4.5, 0.9), rec("b", 5.5, 0.7), rec("c", 10, 0.6)};
  const std::vector<EvalRecord> zero = {rec("a", 4.5, 0.5), rec("b", 5.5, 0.4), rec("c", 10, 0.6)};
  const auto pts = decouple(full, zero, cal, c);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_DOUBLE_EQ(pts[0].f_full, 0.8);
  EXPECT_DOUBLE_EQ(pts[0].f_zero, 0.45);
  EXPECT_NEAR(pts[0].f_prior, 0.35, 1e-12);
  EXPECT_DOUBLE_EQ(pts[0].ocr_raw, 0.75);
  EXPECT_NEAR(pts[0].k_quality, 0.6, 1e-12);
  EXPECT_EQ(pts[0].n_full, 2u);
  EXPECT_NEAR(pts[0].ned_prior, 0.2 - 0.55, 1e-12);
  EXPECT_TRUE(pts[1].anomaly);  // 0.6 / 0.5
  EXPECT_TRUE(pts[2].gap);
  EXPECT_TRUE(std::isnan(pts[2].k_quality));

  // Per-sample: mean of 0.5 / OCR(4.5) and 0.4 / OCR(5.5).
  const auto ps = decouple(full, zero, cal, c, metrics::KAggregation::PerSample);
  EXPECT_NEAR(ps[0].k_quality, (0.5 / 0.775 + 0.4 / 0.725) / 2, 1e-12);
  EXPECT_EQ(ps[0].mode, metrics::KAggregation::PerSample);
}

TEST(Calibration, FromRecordsAndFiles) {
  std::vector<EvalRecord> refs = {rec("a", 5, 0.8), rec("b", 10, 0.6), rec("c", 15, 0.4)};
  auto broken = rec("d", 20, 0.0);
  broken.error = "timeout";
  refs.push_back(broken);
  const auto cal = calibrate_from_records(refs);
  EXPECT_NEAR(cal.slope, -0.04, 1e-12);
  EXPECT_NEAR(cal.intercept, 1.0, 1e-12);
  EXPECT_EQ(cal.reference_sample_ids.size(), 3u);
  const auto back = calibration_from_json(nlohmann::json::parse(calibration_to_json(cal).dump()));
  EXPECT_DOUBLE_EQ(back.slope, cal.slope);
  EXPECT_EQ(back.reference_sample_ids, cal.reference_sample_ids);

  const auto dir = testing::scratch_dir("calpoints");
  std::ofstream(dir / "pts.csv") << "ratio,accuracy\n7.5,0.761\n# note\n10 0.686\n";
  EXPECT_EQ(read_calibration_points(dir / "pts.csv"),
            (std::vector<std::pair<double, double>>{{7.5, 0.761}, {10, 0.686}}));
  std::ofstream(dir / "bad.csv") << "7.5,0.7\nten,0.6\n";
  EXPECT_THROW(read_calibration_points(dir / "bad.csv"), Error);
}

TEST(Points, JsonRoundTripKeepsNaN) {
  auto p = metrics::decouple_point(7.5, 0.9, 0.5, 0.8);
  metrics::DecoupledPoint gap;
  gap.compression_bin = 10;
  gap.gap = true;
  const auto dir = testing::scratch_dir("points");
  PointSet set{"fox", {{"m", {p, gap}}}, std::nullopt};
  write_points(set, dir / "p.json");
  const auto back = read_points(dir / "p.json");
  EXPECT_EQ(back.dataset, "fox");
  ASSERT_EQ(back.per_model.at("m").size(), 2u);
  EXPECT_DOUBLE_EQ(back.per_model.at("m")[0].k_quality, p.k_quality);
  EXPECT_TRUE(std::isnan(back.per_model.at("m")[1].f_full));
  EXPECT_TRUE(back.per_model.at("m")[1].gap);
}

TEST(Report, ShuffledDeltaSigns) {
  SweepConfig c;
  const std::vector<EvalRecord> orig = {rec("a", 7.5, 0.9), rec("b", 10, 0.8)};
  const std::vector<EvalRecord> shuf = {rec("a", 7.5, 0.6), rec("b", 10, 0.85)};
  const auto rows = shuffled_comparison(orig, shuf, c);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(rows[0].delta_drop(), 0.3, 1e-12);
  EXPECT_NEAR(rows[1].delta_drop(), -0.05, 1e-12);
  const auto dir = testing::scratch_dir("shuffled");
  write_shuffled_csv(rows, dir / "t.csv");
  std::ifstream in(dir / "t.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "Compression,Original,Shuffled,Delta_Drop,Delta_Signed,n_original,n_shuffled");
  EXPECT_EQ(first, "7.5,0.900000,0.600000,0.300000,-0.300000,1,1");
}

TEST(Report, TokenHistogram) {
  const std::vector<double> v = {10, 150, 299, 600, 650, 700, 800, 899, 1800, 2099};
  const auto h = token_histogram(v, 300);
  EXPECT_DOUBLE_EQ(h.lo, 0.0);
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{3, 0, 5, 0, 0, 0, 2}));
  EXPECT_DOUBLE_EQ(h.hi(), 2100.0);
  const std::vector<double> shifted = {350, 599};
  const auto g = token_histogram(shifted, 300);
  EXPECT_DOUBLE_EQ(g.lo, 300.0);
  EXPECT_EQ(g.counts, (std::vector<std::size_t>{2}));
  EXPECT_THROW(token_histogram(v, 0), Error);
}

TEST(Report, StrategyAgainstTextBaseline) {
  const std::vector<EvalRecord> visual = {rec("a", 5, 0.8, "x"), rec("b", 5, 0.9, "x"), rec("a", 5, 0.95, "y")};
  const std::vector<EvalRecord> text = {rec("a", 0, 1.0, "x"), rec("b", 0, 0.9, "x")};
  const auto d = strategy_deltas(visual, text);
  EXPECT_NEAR(d.at("x")[0], -0.2, 1e-12);
  EXPECT_NEAR(d.at("x")[1], 0.0, 1e-12);
  EXPECT_NEAR(d.at("y")[0], -0.05, 1e-12);  // no text record: baseline 1.0
  const auto s = metrics::strategy_score(d, 0.01);
  EXPECT_EQ(s.best_model, "y");
}

TEST(Report, WritesEveryArtifact) {
  ReportInputs in;
  in.dataset = "fox";
  metrics::LinearCalibration cal;
  cal.intercept = 1.0;
  cal.slope = -0.03;
  in.calibration = cal;
  const std::vector<EvalRecord> full = {rec("a", 7.5, 0.9), rec("b", 10, 0.8)};
  const std::vector<EvalRecord> zero = {rec("a", 7.5, 0.6), rec("b", 10, 0.4)};
  in.points["m"] = decouple(full, zero, cal, in.sweep);
  in.original = full;
  in.shuffled = zero;
  in.text_token_counts = {100, 450, 900};
  const auto dir = testing::scratch_dir("report");
  const auto files = write_report(in, dir);
  for (const char* name : {"decoupled.csv", "tables.csv", "table1_preservation.csv", "table2_prior.csv",
                           "table3_ocr_raw.csv", "supplementary_ned.csv", "table4_shuffled.csv",
                           "token_histogram.csv", "strategy_score.csv", "strategy_score.txt", "report_meta.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  EXPECT_EQ(files.size(), 11u);
  std::ifstream t(dir / "tables.csv");
  std::string header;
  std::getline(t, header);
  EXPECT_EQ(header, "Compression,F_full,F_zero,F_prior,OCR_raw,K_quality");
  const auto meta = nlohmann::json::parse(std::ifstream(dir / "report_meta.json"));
  EXPECT_EQ(meta["dataset"], "fox");
  ReportInputs nothing;
  EXPECT_THROW(write_report(nothing, dir), Error);
}

}  // namespace
}  // namespace zerosense::harness

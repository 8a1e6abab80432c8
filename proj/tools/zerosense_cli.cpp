// zerosense_cli.cpp
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
// Command line front end. Every stage reads its inputs from paths given on
// the command line and writes under --out.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "zerosense/zerosense.hpp"

namespace fs = std::filesystem;
using namespace zerosense;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out = "out";
  std::string log_level = "info";
};

Config resolve(const Globals& g) {
  Config c = g.config.empty() ? Config{} : load_config(g.config);
  if (g.seed) {
    c.seed = *g.seed;
    c.sweep.seeds = {c.seed};
  }
  if (g.jobs) c.jobs = *g.jobs;
  c.validate();
  return c;
}

std::unique_ptr<layout::FontMetricsModel> make_metrics(const Config& c) {
  if (c.layout_metrics == "monospace") return std::make_unique<layout::MonospaceMetrics>();
  const fs::path font = c.layout_font.empty() ? layout::default_font_path() : fs::path(c.layout_font);
  return std::make_unique<layout::TrueTypeMetrics>(layout::TrueTypeFace::load(font),
                                                   c.theta.line_height_factor);
}

std::unique_ptr<zerotext::ProbabilityOracle> make_oracle(const Config& c, const std::string& corpus_override) {
  if (c.oracle == "remote") {
    if (c.oracle_url.empty()) throw Error("remote oracle needs zerotext.url");
    zerotext::RemoteOracleOptions o;
    o.top_k = c.oracle_top_k;
    return std::make_unique<zerotext::RemoteOracle>(c.oracle_url, o);
  }
  const std::string corpus = corpus_override.empty() ? c.oracle_corpus : corpus_override;
  if (corpus.empty()) throw Error("n-gram oracle needs a training text (zerotext.corpus or --oracle-corpus)");
  spdlog::info("training order-{} n-gram oracle on {}", c.ngram.order, corpus);
  return std::make_unique<zerotext::NgramOracle>(zerotext::NgramOracle::train_file(corpus, c.ngram));
}

render::TextTokenCounter make_counter(const Config& c) {
  return c.tokenizer_vocab.empty() ? render::TextTokenCounter{}
                                   : render::TextTokenCounter::from_vocab_file(c.tokenizer_vocab);
}

harness::CorpusRenderOptions render_options(const Config& c) {
  harness::CorpusRenderOptions o;
  o.theta = c.theta;
  o.modes = c.modes;
  o.seed = c.seed;
  o.jobs = c.jobs;
  o.counter = make_counter(c);
  return o;
}

std::unique_ptr<harness::ModelClient> make_client(const Config& c, const std::string& kind_override,
                                                  const std::string& predictions_override) {
  const std::string kind = kind_override.empty() ? c.client : kind_override;
  if (kind == "echo") return std::make_unique<harness::EchoStub>();
  if (kind == "constant") return std::make_unique<harness::ConstantStub>();
  if (kind == "file") {
    const std::string p = predictions_override.empty() ? c.predictions : predictions_override;
    if (p.empty()) throw Error("file client needs harness.predictions or --predictions");
    return std::make_unique<harness::FileStub>(p);
  }
  if (kind == "wire") {
    if (c.wire.endpoint.empty()) throw Error("wire client needs harness.endpoint");
    return std::make_unique<harness::WireClient>(c.wire);
  }
  throw Error("unknown client '" + kind + "' (echo, constant, file, wire)");
}

std::vector<harness::EvalRecord> read_optional_records(const std::string& path) {
  return path.empty() ? std::vector<harness::EvalRecord>{} : harness::read_records(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layout-preserving zero-text evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Run seed (overrides general.seed)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads (overrides general.jobs)")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error")->capture_default_str();

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Reconstruct layout and solve font sizes");
  std::string analyze_in;
  bool strict = false;
  analyze->add_option("--in", analyze_in, "Annotated corpus directory")->required()->check(CLI::ExistingDirectory);
  analyze->add_flag("--strict", strict, "Reject boxes that leave the page instead of clipping them");

  // generate
  auto* generate = app.add_subcommand("generate", "Sample zero text for an analyzed corpus");
  std::string gen_in, oracle_corpus;
  generate->add_option("--in", gen_in, "Analyzed corpus directory")->required()->check(CLI::ExistingDirectory);
  generate->add_option("--oracle-corpus", oracle_corpus, "Training text for the n-gram oracle");

  // render
  auto* render_cmd = app.add_subcommand("render", "Render zero-text or original pages with sidecar metadata");
  std::string render_in, zero_text;
  bool original = false;
  render_cmd->add_option("--in", render_in, "Analyzed corpus directory")->required()->check(CLI::ExistingDirectory);
  render_cmd->add_option("--zero-text", zero_text, "zerotext.jsonl from the generate stage");
  render_cmd->add_flag("--original", original, "Pad the source images instead of rendering zero text");

  // perturb
  auto* perturb_cmd = app.add_subcommand("perturb", "Build the word-shuffled corpus");
  std::string perturb_in;
  std::optional<int> permutations;
  perturb_cmd->add_option("--in", perturb_in, "Word-level corpus directory")->required()->check(CLI::ExistingDirectory);
  perturb_cmd->add_option("--permutations", permutations, "Copies per page");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Run a model client over a rendered corpus");
  std::string eval_in, dataset = "zerosense", client_kind, predictions, records_out;
  bool no_resume = false;
  evaluate->add_option("--in", eval_in, "Rendered corpus directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--dataset", dataset, "original, zerosense, shuffled or text")->capture_default_str();
  evaluate->add_option("--client", client_kind, "echo, constant, file or wire (overrides harness.client)");
  evaluate->add_option("--predictions", predictions, "Predictions JSONL for the file client");
  evaluate->add_option("--records", records_out, "Output records file (default <out>/records_<dataset>.jsonl)");
  evaluate->add_flag("--no-resume", no_resume, "Re-run samples already present in the records file");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Fit the linear OCR_raw model");
  std::string cal_records, cal_points, cal_model;
  calibrate->add_option("--records", cal_records, "Records of verified full-preservation references");
  calibrate->add_option("--points", cal_points, "CSV of (ratio, accuracy) points");
  calibrate->add_option("--model", cal_model, "Only use records of this model");

  // decouple
  auto* decouple_cmd = app.add_subcommand("decouple", "Per-bin F_full, F_zero, F_prior, OCR_raw, K_quality");
  std::string dec_full, dec_zero, dec_cal, dec_dataset = "zerosense", dec_mode;
  decouple_cmd->add_option("--full", dec_full, "Records on the original renders")->required()->check(CLI::ExistingFile);
  decouple_cmd->add_option("--zero", dec_zero, "Records on the zero-text renders")->required()->check(CLI::ExistingFile);
  decouple_cmd->add_option("--calibration", dec_cal, "calibration.json")->required()->check(CLI::ExistingFile);
  decouple_cmd->add_option("--dataset", dec_dataset, "Dataset label for the CSV")->capture_default_str();
  decouple_cmd->add_option("--k-aggregation", dec_mode, "mean_then_divide or per_sample");

  // report
  auto* report_cmd = app.add_subcommand("report", "Write the table CSVs, histogram and strategy score");
  std::string rep_points, rep_original, rep_shuffled, rep_text, rep_meta;
  report_cmd->add_option("--points", rep_points, "decoupled.json from the decouple stage");
  report_cmd->add_option("--original", rep_original, "Records on the original renders");
  report_cmd->add_option("--shuffled", rep_shuffled, "Records on the shuffled renders");
  report_cmd->add_option("--text", rep_text, "Records with pure-text input (strategy-score baseline)");
  report_cmd->add_option("--render-meta", rep_meta, "render_meta.jsonl for the token histogram");

  // audit
  auto* audit = app.add_subcommand("audit", "Posterior audit of generated zero text");
  std::string audit_text, audit_control, audit_corpus;
  double threshold = 1e-5;
  audit->add_option("--zero-text", audit_text, "zerotext.jsonl to audit")->required()->check(CLI::ExistingFile);
  audit->add_option("--oracle-corpus", audit_corpus, "Training text for the n-gram oracle");
  audit->add_option("--control", audit_control, "Natural text file audited line by line for comparison");
  audit->add_option("--threshold", threshold, "Posterior ceiling")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    const Config cfg = resolve(g);
    const fs::path out = g.out;
    fs::create_directories(out);

    if (*analyze) {
      IngestOptions io;
      io.clip_out_of_page = !strict;
      const Corpus corpus = load_corpus(analyze_in, io);
      const auto metrics = make_metrics(cfg);
      layout::ThetaOptions to;
      to.ascii_threshold = cfg.ascii_threshold;
      harness::save_theta_corpus(harness::analyze_corpus(corpus, *metrics, to, cfg.jobs), out);
      spdlog::info("analyzed {} pages into {}", corpus.pages.size(), (out / kThetaManifestName).string());
    } else if (*generate) {
      const Corpus corpus = harness::load_theta_corpus(gen_in);
      const auto oracle = make_oracle(cfg, oracle_corpus);
      zerotext::GenSpec spec = cfg.gen;
      spec.seed = cfg.seed;
      const auto pages = harness::generate_corpus_text(corpus, *oracle, spec, cfg.jobs);
      std::size_t relaxed = 0, blocks = 0;
      for (const auto& p : pages) {
        for (const auto& [i, b] : p.blocks) {
          ++blocks;
          if (b.generation.relaxed_past(1e-5)) ++relaxed;
        }
      }
      harness::write_zero_text(pages, out / harness::kZeroTextName);
      spdlog::info("oracle {}", oracle->identity());
      spdlog::info("generated {} blocks; {} relaxed past 1e-5", blocks, relaxed);
    } else if (*render_cmd) {
      const Corpus corpus = harness::load_theta_corpus(render_in);
      const auto opts = render_options(cfg);
      if (original) {
        harness::render_original_corpus(corpus, opts, out);
      } else {
        if (zero_text.empty()) throw Error("render needs --zero-text (or --original)");
        harness::render_zerosense_corpus(corpus, harness::read_zero_text(zero_text), opts, out);
      }
      spdlog::info("rendered {} pages into {}", corpus.pages.size(), out.string());
    } else if (*perturb_cmd) {
      const Corpus corpus = load_corpus(perturb_in);
      harness::PerturbOptions po;
      po.permutations = permutations.value_or(cfg.permutations);
      po.tolerance = cfg.tolerance;
      harness::perturb_corpus(corpus, po, render_options(cfg), out);
      spdlog::info("wrote {} shuffled pages into {}", corpus.pages.size() * po.permutations, out.string());
    } else if (*evaluate) {
      const auto tag = harness::parse_dataset_tag(dataset);
      const auto samples = harness::load_rendered_corpus(eval_in, tag);
      const auto client = make_client(cfg, client_kind, predictions);
      harness::EvalOptions eo;
      eo.instruction = cfg.instruction;
      eo.jobs = cfg.jobs;
      eo.resume = !no_resume;
      eo.output = records_out.empty() ? out / ("records_" + dataset + ".jsonl") : fs::path(records_out);
      const auto records = harness::run_eval(samples, *client, eo);
      std::size_t errors = 0;
      for (const auto& r : records) errors += !r.error.empty();
      harness::write_records(records, *eo.output);  // final file in canonical order
      spdlog::info("{} records ({} with errors) in {}", records.size(), errors, eo.output->string());
    } else if (*calibrate) {
      metrics::LinearCalibration cal;
      if (!cal_points.empty()) {
        cal = metrics::fit_ocr_raw(harness::read_calibration_points(cal_points));
      } else if (!cal_records.empty()) {
        auto recs = harness::read_records(cal_records);
        if (!cal_model.empty()) recs = harness::filter_model(recs, cal_model);
        cal = harness::calibrate_from_records(recs);
      } else {
        throw Error("calibrate needs --records or --points");
      }
      std::ofstream o(out / "calibration.json", std::ios::binary);
      o << harness::calibration_to_json(cal).dump(2) << '\n';
      spdlog::info("OCR_raw(rho) = {:.6f} + {:.6f} rho, max residual {:.6f}", cal.intercept, cal.slope,
                   cal.fit_residual_max);
    } else if (*decouple_cmd) {
      const auto full = harness::read_records(dec_full);
      const auto zero = harness::read_records(dec_zero);
      const auto cal = harness::load_calibration(dec_cal);
      const auto mode = dec_mode.empty() ? cfg.k_aggregation : metrics::parse_aggregation(dec_mode);
      std::map<std::string, std::vector<metrics::DecoupledPoint>> per_model;
      for (const auto& m : harness::models_in(full)) {
        per_model[m] = harness::decouple(harness::filter_model(full, m), harness::filter_model(zero, m), cal,
                                         cfg.sweep, mode);
      }
      if (per_model.empty()) throw Error("no records in " + dec_full);
      harness::write_points({dec_dataset, per_model, cal}, out / "decoupled.json");
      harness::write_decoupled_csv(per_model, dec_dataset, out / "decoupled.csv");
      spdlog::info("decoupled {} model(s) over {} bins", per_model.size(), cfg.sweep.bins.size());
    } else if (*report_cmd) {
      harness::ReportInputs in;
      in.sweep = cfg.sweep;
      in.theta = cfg.theta;
      in.histogram_width = cfg.histogram_width;
      in.strategy_epsilon = cfg.epsilon;
      if (!rep_points.empty()) {
        auto loaded = harness::read_points(rep_points);
        in.dataset = loaded.dataset;
        in.points = std::move(loaded.per_model);
        in.calibration = loaded.calibration;
      }
      in.original = read_optional_records(rep_original);
      in.shuffled = read_optional_records(rep_shuffled);
      in.text_input = read_optional_records(rep_text);
      if (!rep_meta.empty()) {
        std::set<std::string> seen;
        for (const auto& m : render::read_meta(rep_meta)) {
          if (seen.insert(m.id).second) in.text_token_counts.push_back(static_cast<double>(m.text_tokens));
        }
      }
      for (const auto& f : harness::write_report(in, out)) spdlog::info("wrote {}", f.string());
    } else if (*audit) {
      const auto oracle = make_oracle(cfg, audit_corpus);
      const auto audits = harness::audit_zero_text(harness::read_zero_text(audit_text), *oracle, cfg.ascii_threshold);
      harness::CsvWriter w(out / "audit.csv");
      w.row({"page_id", "block", "tokens", "max_posterior", "fraction_below_threshold"});
      double worst = 0.0;
      for (const auto& a : audits) {
        worst = std::max(worst, a.audit.max_posterior);
        w.row({a.page_id, std::to_string(a.block), std::to_string(a.audit.posteriors.size()),
               fmt::format("{:.6e}", a.audit.max_posterior), harness::fmt_num(a.audit.fraction_below(threshold))});
      }
      std::cout << fmt::format("zero text: {} blocks, max posterior {:.3e} ({} {:.0e})\n", audits.size(), worst,
                               worst < threshold ? "below" : "NOT below", threshold);
      if (!audit_control.empty()) {
        const auto* ngram = dynamic_cast<const zerotext::NgramOracle*>(oracle.get());
        if (!ngram) throw Error("--control needs the n-gram oracle");
        std::ifstream in(audit_control);
        if (!in) throw Error("cannot open " + audit_control);
        std::string line;
        double control = 0.0;
        std::size_t lines = 0;
        while (std::getline(in, line)) {
          const auto toks = zerotext::tokenize(line, ngram->options());
          if (toks.empty()) continue;
          try {
            control = std::max(control, zerotext::audit_vacuum(ngram->encode(toks), *oracle).max_posterior);
            ++lines;
          } catch (const std::exception&) {
            // out-of-vocabulary line
          }
        }
        std::cout << fmt::format("control: {} lines, max posterior {:.3e}\n", lines, control);
      }
      if (worst >= threshold) return 2;
    }
  } catch (const harness::ClientUnreachable& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

// egovqa: run, score and validate long-video multiple-choice VQA benchmarks.

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "egovqa/egovqa.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;

struct RunArgs {
  std::string manifest, config, out = "out", backend = "http", fixtures;
  bool no_pre = false, no_tcot = false, no_post = false, resume = false;
  std::size_t parallel = 1;
};

std::shared_ptr<egovqa::MediaProvider> make_media(const egovqa::PipelineConfig& cfg) {
  if (cfg.media.provider == "external")
    return std::make_shared<egovqa::ExternalFrameProvider>(cfg.media.extractor, cfg.media.work_dir);
  return std::make_shared<egovqa::SyntheticMediaProvider>(cfg.media.durations_ms);
}

int cmd_run(const RunArgs& a) {
  using namespace egovqa;
  PipelineConfig cfg;
  std::vector<QuestionRecord> questions;
  std::unique_ptr<Backend> backend;
  std::shared_ptr<MediaProvider> media;
  StageToggles toggles{!a.no_pre, !a.no_tcot, !a.no_post};
  std::unique_ptr<Pipeline> pipeline;
  try {
    cfg = PipelineConfig::load(a.config);
    questions = load_manifest(a.manifest);
    media = make_media(cfg);
    if (a.backend == "mock") {
      if (a.fixtures.empty()) throw Error(Errc::ConfigError, "--backend mock needs --mock-fixtures");
      backend = MockBackend::load(a.fixtures);
    } else {
      backend = std::make_unique<HttpBackend>(HttpBackendConfig::from_json(cfg.backend), media);
    }
    pipeline = std::make_unique<Pipeline>(cfg, toggles, *backend, media);
  } catch (const Error& e) {
    std::cerr << "egovqa: " << e.what() << "\n";
    return kExitConfig;
  }
  if (!backend->available()) {
    std::cerr << "egovqa: backend unreachable at startup\n";
    return kExitBackend;
  }
  try {
    auto report = run_benchmark(questions, *pipeline, {a.out, a.parallel, a.resume});
    std::cout << report_csv(report);
    std::cerr << report.total << " questions, " << report.overall.correct << " correct, " << report.errors
              << " errors, " << report.unextractable << " unextractable\n";
  } catch (const Error& e) {
    std::cerr << "egovqa: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

int cmd_score(const std::string& dir, const std::string& out, bool macro) {
  using namespace egovqa;
  try {
    auto set = read_verdicts(dir);
    auto report = score(std::move(set.verdicts), macro ? Averaging::Macro : Averaging::Weighted, set.toggles,
                        set.config_hash);
    if (!out.empty()) {
      std::filesystem::create_directories(out);
      util::write_file_atomic(std::filesystem::path(out) / "report.json", report_json(report));
      util::write_file_atomic(std::filesystem::path(out) / "report.csv", report_csv(report));
    }
    std::cout << report_csv(report);
  } catch (const Error& e) {
    std::cerr << "egovqa: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

int cmd_validate(const std::string& manifest, const std::string& config) {
  using namespace egovqa;
  try {
    auto qs = load_manifest(manifest);
    if (!config.empty()) {
      auto cfg = PipelineConfig::load(config);
      auto map = ModalityMap::load(cfg.data_dir / "modality_map.json");
      for (const auto& q : qs) {
        try {
          (void)classify_modality(q, map);
          (void)standardize_choices(q.choices, q.visuals.videos, cfg.delimiter);
        } catch (const Error& e) {
          throw Error(e.code(), "question '" + q.id + "': " + e.what());
        }
      }
    }
    std::cout << qs.size() << " questions OK\n";
  } catch (const Error& e) {
    std::cerr << "egovqa: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-video multiple-choice VQA pipeline"};
  app.require_subcommand(1);

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run a manifest through the pipeline");
  r->add_option("--manifest", run.manifest, "Question manifest (JSON array)")->required();
  r->add_option("--config", run.config, "Pipeline config (JSON)")->required();
  r->add_option("--out", run.out, "Output directory");
  r->add_flag("--no-preprocess", run.no_pre, "Pass question text and options through unchanged");
  r->add_flag("--no-tcot", run.no_tcot, "Single direct answer call, no intermediate steps");
  r->add_flag("--no-postprocess", run.no_post, "Exact-letter cleaning only, no ensemble");
  r->add_option("--parallel", run.parallel, "Questions in flight")->check(CLI::PositiveNumber);
  r->add_option("--backend", run.backend, "mock or http")->check(CLI::IsMember({"mock", "http"}));
  r->add_option("--mock-fixtures", run.fixtures, "Scripted replies for the mock backend");
  r->add_flag("--resume", run.resume, "Skip questions already answered under the same config");

  std::string verdicts, score_out;
  bool macro = false;
  auto* s = app.add_subcommand("score", "Re-score a directory of verdict transcripts");
  s->add_option("--verdicts", verdicts, "Directory of *.jsonl transcripts")->required();
  s->add_option("--out", score_out, "Write report.json and report.csv here");
  s->add_flag("--macro", macro, "Average prototypes, then categories, instead of pooling questions");

  std::string manifest, config;
  auto* v = app.add_subcommand("validate", "Check a manifest");
  v->add_option("--manifest", manifest, "Question manifest")->required();
  v->add_option("--config", config, "Also check modality and options against this config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }
  if (*r) return cmd_run(run);
  if (*s) return cmd_score(verdicts, score_out, macro);
  return cmd_validate(manifest, config);
}

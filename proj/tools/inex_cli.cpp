// Command-line front end: corpus generation, pipeline runs, evaluation,
// calibration, information diagnostics, and transcript replay.
//
// Exit codes: 0 success, 2 usage/config error, 3 invariant violation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "inex/config.hpp"
#include "inex/errors.hpp"
#include "inex/eval.hpp"
#include "inex/orchestrator.hpp"
#include "inex/rng.hpp"
#include "inex/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInvariant = 3;

// Temp-then-rename so interrupted runs never leave partial files in place.
void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

std::vector<inex::CorpusItem> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw inex::ConfigError("corpus_path", "cannot open " + path);
  std::vector<inex::CorpusItem> corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    corpus.push_back(inex::corpus_item_from_json(json::parse(line)));
  }
  if (corpus.empty()) throw inex::ConfigError("corpus_path", "empty corpus " + path);
  return corpus;
}

struct ItemRun {
  inex::Response response;
  inex::Transcript transcript;
  double score = 0.0;
};

// One full pipeline pass for a corpus item with freshly constructed agents.
ItemRun run_item(const inex::CorpusItem& item, const inex::ModelWeights& weights,
                 const inex::RunConfig& cfg) {
  inex::SimDecisionAgent decision(weights, cfg.introspection);
  inex::SimTextReflectionAgent text(cfg.reflection);
  inex::SimEditAgent edit;
  inex::SimVisionReflectionAgent vision(cfg.orchestrator.gamma_clip);
  inex::AgentSet agents{&decision, &text, &edit, &vision};
  inex::RunResult rr = inex::run_inex(item.scene, item.query, agents, cfg.orchestrator);
  return {rr.response, rr.transcript, decision.session_peak_tver()};
}

std::string run_outputs(const std::vector<inex::CorpusItem>& corpus,
                        const inex::RunConfig& cfg, std::string* transcripts_out,
                        std::string* responses_out) {
  const inex::ModelWeights weights = inex::build_model(cfg.model);
  std::ostringstream records, transcripts, responses;
  for (const auto& item : corpus) {
    const ItemRun run = run_item(item, weights, cfg);
    const std::size_t halluc = inex::count_hallucinated_facts(run.response, item.scene);
    records << json{{"id", item.id},
                    {"predicted", run.response.yes.value_or(false) ? "yes" : "no"},
                    {"gold", item.gold_yes ? "yes" : "no"},
                    {"score", run.score},
                    {"hallucinated", halluc > 0}}
                   .dump()
            << "\n";
    transcripts << json{{"id", item.id},
                        {"events", inex::transcript_to_json_lines(run.transcript)}}
                       .dump()
                << "\n";
    responses << json{{"id", item.id}, {"response", inex::response_to_json(run.response)}}
                     .dump()
              << "\n";
  }
  *transcripts_out = transcripts.str();
  *responses_out = responses.str();
  return records.str();
}

std::vector<inex::EvalRecord> load_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw inex::ConfigError("records", "cannot open " + path.string());
  std::vector<inex::EvalRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    inex::EvalRecord r;
    r.id = std::to_string(j.at("id").get<int>());
    r.predicted = j.at("predicted").get<std::string>();
    r.gold = j.at("gold").get<std::string>();
    r.score = j.at("score").get<double>();
    r.hallucinated = j.at("hallucinated").get<bool>();
    records.push_back(r);
  }
  if (records.empty()) throw inex::ConfigError("records", "empty " + path.string());
  return records;
}

inex::RunConfig load_config_or_default(const std::string& config_path) {
  if (config_path.empty()) return inex::RunConfig{};
  return inex::load_run_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"InEx hallucination-mitigation pipeline"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  bool print_defaults = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "Seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--out", out_dir, "Output directory override");
  app.add_flag("--print-defaults", print_defaults, "Dump the default config as JSON");

  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic evaluation corpus");
  gen->fallthrough();
  std::size_t gen_size = 0;
  std::string gen_setting = "random";
  gen->add_option("--size", gen_size, "Number of items")->required();
  gen->add_option("--setting", gen_setting, "random | popular | adversarial");

  auto* run = app.add_subcommand("run", "Run the full pipeline over a corpus");
  run->fallthrough();
  auto* eval = app.add_subcommand("eval", "Compute answer metrics from run records");
  eval->fallthrough();
  auto* calibrate = app.add_subcommand("calibrate", "Compute calibration bins from run records");
  calibrate->fallthrough();

  auto* diagnose = app.add_subcommand("diagnose", "Mutual-information direction diagnostics");
  diagnose->fallthrough();
  std::size_t diag_configs = 40;
  double diag_beta = 1.0;
  double diag_alpha = 0.5;
  diagnose->add_option("--configs", diag_configs, "Number of seeded configurations");
  diagnose->add_option("--beta", diag_beta, "IB trade-off parameter");
  diagnose->add_option("--alpha", diag_alpha, "Introspection strength");

  auto* replay = app.add_subcommand("replay", "Re-run and compare recorded transcripts");
  replay->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (print_defaults) {
      std::cout << inex::run_config_to_json(inex::RunConfig{}).dump(2) << "\n";
      return kExitOk;
    }

    inex::RunConfig cfg = load_config_or_default(config_path);
    if (seed_set) cfg.seed = seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    const fs::path out(cfg.output_dir);

    if (gen->parsed()) {
      if (gen_size < 1) throw inex::ConfigError("size", "must be >= 1");
      inex::CorpusSetting setting;
      if (gen_setting == "random") setting = inex::CorpusSetting::Random;
      else if (gen_setting == "popular") setting = inex::CorpusSetting::Popular;
      else if (gen_setting == "adversarial") setting = inex::CorpusSetting::Adversarial;
      else throw inex::ConfigError("setting", "unknown setting " + gen_setting);

      const auto corpus = inex::gen_corpus(gen_size, setting, cfg.seed, cfg.model.vocab);
      std::ostringstream lines;
      for (const auto& item : corpus) lines << inex::corpus_item_to_json(item).dump() << "\n";
      write_atomic(out / "corpus.jsonl", lines.str());
      std::cout << "wrote " << (out / "corpus.jsonl").string() << "\n";
      return kExitOk;
    }

    if (run->parsed()) {
      const auto corpus = load_corpus(cfg.corpus_path);
      std::string transcripts, responses;
      const std::string records = run_outputs(corpus, cfg, &transcripts, &responses);
      write_atomic(out / "records.jsonl", records);
      write_atomic(out / "transcripts.jsonl", transcripts);
      write_atomic(out / "responses.jsonl", responses);
      std::cout << "ran " << corpus.size() << " items into " << out.string() << "\n";
      return kExitOk;
    }

    if (eval->parsed()) {
      const auto records = load_records(out / "records.jsonl");
      const inex::BinaryMetrics m = inex::binary_metrics(records);
      std::ostringstream csv;
      csv.precision(12);
      csv << "metric,value\n"
          << "accuracy," << m.accuracy << "\n"
          << "precision," << m.precision << "\n"
          << "recall," << m.recall << "\n"
          << "f1," << m.f1 << "\n";
      write_atomic(out / "metrics.csv", csv.str());
      std::cout << "wrote " << (out / "metrics.csv").string() << "\n";
      return kExitOk;
    }

    if (calibrate->parsed()) {
      const auto records = load_records(out / "records.jsonl");
      const inex::CalibrationReport report = inex::ece(records, 10);
      write_atomic(out / "calibration.csv", inex::calibration_csv(report));
      std::cout << "wrote " << (out / "calibration.csv").string() << "\n";
      return kExitOk;
    }

    if (diagnose->parsed()) {
      std::ostringstream reports;
      inex::DirectionSummary summary;
      summary.configs = diag_configs;
      for (std::size_t c = 0; c < diag_configs; ++c) {
        const std::uint64_t config_seed = inex::mix_seed(cfg.seed, c + 1);
        const inex::DiagnosticSamples samples =
            inex::collect_samples(config_seed, 100, diag_alpha);
        // One shared scheme calibrated on both state families so a mean shift
        // in the enhanced states cannot collapse their codes.
        std::vector<inex::Vec> calibration = samples.h_states;
        calibration.insert(calibration.end(), samples.h_hat_states.begin(),
                           samples.h_hat_states.end());
        const inex::DiscretizationScheme scheme = inex::make_scheme(
            samples.h_states.front().size(), 2, config_seed, calibration);
        const inex::MiReport report = inex::ib_diagnostic(samples, diag_beta, scheme);
        if (report.mi_enhanced >= report.mi_original - summary.slack) {
          ++summary.mi_direction_holds;
        }
        if (report.cond_entropy_enhanced <= report.cond_entropy_original + summary.slack) {
          ++summary.cond_entropy_direction_holds;
        }
        if (report.ib_enhanced <= report.ib_original + summary.slack) {
          ++summary.ib_direction_holds;
        }
        json line = inex::mi_report_to_json(report);
        line["config_seed"] = config_seed;
        reports << line.dump() << "\n";
      }
      write_atomic(out / "mi_reports.jsonl", reports.str());
      write_atomic(out / "direction_summary.json",
                   json{{"configs", summary.configs},
                        {"mi_direction_holds", summary.mi_direction_holds},
                        {"cond_entropy_direction_holds", summary.cond_entropy_direction_holds},
                        {"ib_direction_holds", summary.ib_direction_holds},
                        {"slack", summary.slack}}
                           .dump(2) +
                       "\n");
      std::cout << "wrote " << (out / "mi_reports.jsonl").string() << "\n";
      return kExitOk;
    }

    if (replay->parsed()) {
      const auto corpus = load_corpus(cfg.corpus_path);
      std::ifstream in(out / "transcripts.jsonl");
      if (!in) throw inex::ConfigError("transcripts", "cannot open recorded transcripts");
      std::string line;
      std::size_t idx = 0;
      const inex::ModelWeights weights = inex::build_model(cfg.model);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (idx >= corpus.size()) throw inex::ConfigError("transcripts", "extra lines");
        const ItemRun rerun = run_item(corpus[idx], weights, cfg);
        const json recorded = json::parse(line);
        const json fresh = {{"id", corpus[idx].id},
                            {"events", inex::transcript_to_json_lines(rerun.transcript)}};
        if (recorded != fresh) {
          std::cerr << "replay mismatch at item " << corpus[idx].id << "\n";
          return kExitInvariant;
        }
        ++idx;
      }
      if (idx != corpus.size()) {
        std::cerr << "replay: transcript count mismatch\n";
        return kExitInvariant;
      }
      std::cout << "replayed " << idx << " items, all transcripts match\n";
      return kExitOk;
    }

    std::cerr << app.help();
    return kExitUsage;
  } catch (const inex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const inex::ReplayError& e) {
    std::cerr << "replay error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
}

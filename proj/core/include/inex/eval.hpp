#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "inex/agents.hpp"
#include "inex/orchestrator.hpp"
#include "inex/scene.hpp"
#include "inex/toy_mllm.hpp"

namespace inex {

struct EvalRecord {
  std::string id;
  std::string predicted;  // "yes" / "no"
  std::string gold;
  double score = 0.0;  // uncertainty score (TVER reduction)
  bool hallucinated = false;
};

struct BinaryMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some denominator was zero
};

struct ChairMetrics {
  double chair_s = 0.0;
  double chair_i = 0.0;
  double recall = 0.0;
  bool degenerate = false;
};

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double hallucination_rate = 0.0;
  double mean_score = 0.0;  // mean normalized score of the bin
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
  double auroc = -1.0;  // -1 when undefined (single class)
  bool degenerate = false;
};

// "yes" is the positive class. Throws std::invalid_argument on empty input.
BinaryMetrics binary_metrics(const std::vector<EvalRecord>& records);

// Per response: (asserted object categories, gold object categories).
ChairMetrics chair_metrics(
    const std::vector<std::pair<std::set<std::string>, std::set<std::string>>>& responses);

// Mann-Whitney AUROC of the uncertainty score as a hallucination detector,
// ties counted 0.5. Throws UndefinedMetricError on single-class input.
double auroc(const std::vector<EvalRecord>& records);

// Min-max normalized scores, equal-width bins. All-identical scores collapse
// to a single degenerate bin using the raw score clamped to [0,1].
CalibrationReport ece(const std::vector<EvalRecord>& records, std::size_t num_bins);

// ---- corpus -------------------------------------------------------------

enum class CorpusSetting { Random, Popular, Adversarial };

struct CorpusItem {
  int id = 0;
  Scene scene;
  Query query;
  bool gold_yes = false;
};

// POPE-style balanced yes/no corpus. Negative categories are sampled
// uniformly (random), by global frequency (popular), or from categories
// co-occurring with the scene's objects elsewhere in the corpus (adversarial).
std::vector<CorpusItem> gen_corpus(std::size_t size, CorpusSetting setting,
                                   std::uint64_t seed, const Vocab& vocab);

nlohmann::json corpus_item_to_json(const CorpusItem& item);
CorpusItem corpus_item_from_json(const nlohmann::json& j);

// ---- pipelines ----------------------------------------------------------

enum class Pipeline { Baseline, InOnly, FullInex };

enum class ScoreReduction { MaxTver, MeanTver, LastTver };

struct BenchmarkConfig {
  ModelConfig model;
  IntrospectionConfig introspection;
  ReflectionConfig reflection;
  OrchestratorConfig orchestrator;
  std::size_t max_tokens = 6;
  ScoreReduction reduction = ScoreReduction::MaxTver;
  std::map<int, double> logit_bias;  // doctored offsets added to the output bias
  std::size_t ece_bins = 10;
};

struct BenchmarkResult {
  std::vector<EvalRecord> records;
  std::vector<Response> responses;
  BinaryMetrics binary;
  ChairMetrics chair;
  CalibrationReport calibration;
  std::size_t hallucinated_facts = 0;
};

BenchmarkResult run_benchmark(const std::vector<CorpusItem>& corpus,
                              Pipeline pipeline, const BenchmarkConfig& cfg);

// Hallucinated facts of one response against its scene.
std::size_t count_hallucinated_facts(const Response& response, const Scene& scene);

// TVER-derived uncertainty score over decode steps; the +inf sentinel is
// capped so scores stay normalizable.
double reduce_tver_score(const std::vector<DecodeStep>& steps, ScoreReduction reduction);

std::string metrics_csv(const BenchmarkResult& result);
std::string calibration_csv(const CalibrationReport& report);
std::string pipeline_name(Pipeline pipeline);

}  // namespace inex

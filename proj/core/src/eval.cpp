#include "inex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "inex/errors.hpp"
#include "inex/rng.hpp"

namespace inex {

BinaryMetrics binary_metrics(const std::vector<EvalRecord>& records) {
  if (records.empty()) {
    throw std::invalid_argument("binary_metrics: empty input");
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& r : records) {
    const bool pred = r.predicted == "yes";
    const bool gold = r.gold == "yes";
    if (pred && gold) ++tp;
    else if (pred && !gold) ++fp;
    else if (!pred && gold) ++fn;
    else ++tn;
  }
  BinaryMetrics m;
  m.accuracy = static_cast<double>(tp + tn) / records.size();
  if (tp + fp == 0) {
    m.degenerate = true;
  } else {
    m.precision = static_cast<double>(tp) / (tp + fp);
  }
  if (tp + fn == 0) {
    m.degenerate = true;
  } else {
    m.recall = static_cast<double>(tp) / (tp + fn);
  }
  if (m.precision + m.recall == 0.0) {
    m.degenerate = true;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

ChairMetrics chair_metrics(
    const std::vector<std::pair<std::set<std::string>, std::set<std::string>>>& responses) {
  if (responses.empty()) {
    throw std::invalid_argument("chair_metrics: empty input");
  }
  std::size_t total_mentions = 0, hallucinated_mentions = 0;
  std::size_t total_gold = 0, gold_mentioned = 0;
  std::size_t responses_with_hallucination = 0;
  for (const auto& [asserted, gold] : responses) {
    total_mentions += asserted.size();
    total_gold += gold.size();
    bool any = false;
    for (const auto& a : asserted) {
      if (gold.count(a) == 0) {
        ++hallucinated_mentions;
        any = true;
      }
    }
    for (const auto& g : gold) {
      if (asserted.count(g) != 0) ++gold_mentioned;
    }
    if (any) ++responses_with_hallucination;
  }
  ChairMetrics m;
  if (total_mentions == 0) {
    m.degenerate = true;
  } else {
    m.chair_i = static_cast<double>(hallucinated_mentions) / total_mentions;
  }
  m.chair_s = static_cast<double>(responses_with_hallucination) / responses.size();
  if (total_gold == 0) {
    m.degenerate = true;
  } else {
    m.recall = static_cast<double>(gold_mentioned) / total_gold;
  }
  return m;
}

double auroc(const std::vector<EvalRecord>& records) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& r : records) (r.hallucinated ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) {
    throw UndefinedMetricError("auroc: needs both classes");
  }
  // Rank-based Mann-Whitney with average ranks for ties.
  std::vector<std::size_t> idx(records.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return records[a].score < records[b].score;
  });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && records[idx[j]].score == records[idx[i]].score) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0 + 1.0;
    for (std::size_t t = i; t < j; ++t) {
      if (records[idx[t]].hallucinated) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

CalibrationReport ece(const std::vector<EvalRecord>& records, std::size_t num_bins) {
  if (records.empty()) {
    throw std::invalid_argument("ece: empty input");
  }
  if (num_bins < 1) {
    throw std::invalid_argument("ece: num_bins must be >= 1");
  }
  CalibrationReport report;
  double lo = records[0].score, hi = records[0].score;
  for (const auto& r : records) {
    lo = std::min(lo, r.score);
    hi = std::max(hi, r.score);
  }

  const std::size_t n = records.size();
  if (hi == lo) {
    // Degenerate: all scores identical; keep the raw score (clamped) so a
    // matched constant still calibrates to zero error.
    report.degenerate = true;
    const double s = std::clamp(records[0].score, 0.0, 1.0);
    std::size_t halluc = 0;
    for (const auto& r : records) halluc += r.hallucinated ? 1 : 0;
    const double rate = static_cast<double>(halluc) / n;
    report.bins.push_back({0.0, 1.0, n, rate, s});
    report.ece = std::abs(s - rate);
  } else {
    std::vector<std::size_t> count(num_bins, 0), halluc(num_bins, 0);
    std::vector<double> score_sum(num_bins, 0.0);
    for (const auto& r : records) {
      const double s = (r.score - lo) / (hi - lo);
      std::size_t b = static_cast<std::size_t>(s * num_bins);
      if (b >= num_bins) b = num_bins - 1;
      ++count[b];
      if (r.hallucinated) ++halluc[b];
      score_sum[b] += s;
    }
    double e = 0.0;
    for (std::size_t b = 0; b < num_bins; ++b) {
      CalibrationBin bin;
      bin.lower = static_cast<double>(b) / num_bins;
      bin.upper = static_cast<double>(b + 1) / num_bins;
      bin.count = count[b];
      if (count[b] > 0) {
        bin.hallucination_rate = static_cast<double>(halluc[b]) / count[b];
        bin.mean_score = score_sum[b] / count[b];
        e += (static_cast<double>(count[b]) / n) *
             std::abs(bin.mean_score - bin.hallucination_rate);
      }
      report.bins.push_back(bin);
    }
    report.ece = e;
  }

  try {
    report.auroc = auroc(records);
  } catch (const UndefinedMetricError&) {
    report.auroc = -1.0;
  }
  return report;
}

// ---- corpus -------------------------------------------------------------

namespace {

Scene random_scene(Rng& rng, const Vocab& vocab) {
  Scene scene;
  const std::size_t n = 1 + rng.next_below(4);
  std::vector<std::size_t> cats(vocab.categories.size());
  for (std::size_t i = 0; i < cats.size(); ++i) cats[i] = i;
  for (std::size_t i = cats.size(); i > 1; --i) {
    std::swap(cats[i - 1], cats[rng.next_below(i)]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    SceneObject o;
    o.id = static_cast<int>(i);
    o.category = vocab.categories[cats[i]];
    if (rng.next_below(2) == 0) {
      o.attributes["color"] = vocab.colors[rng.next_below(vocab.colors.size())];
    }
    if (rng.next_below(10) < 3) {
      o.attributes["action"] = vocab.actions[rng.next_below(vocab.actions.size())];
    }
    o.pos = {static_cast<int>(rng.next_below(16)), static_cast<int>(rng.next_below(16))};
    scene.objects.push_back(o);
  }
  return scene;
}

std::vector<std::string> absent_categories(const Scene& scene, const Vocab& vocab) {
  std::vector<std::string> out;
  for (const auto& c : vocab.categories) {
    if (!scene.has_category(c)) out.push_back(c);
  }
  return out;
}

}  // namespace

std::vector<CorpusItem> gen_corpus(std::size_t size, CorpusSetting setting,
                                   std::uint64_t seed, const Vocab& vocab) {
  if (size < 1) throw std::invalid_argument("gen_corpus: size must be >= 1");
  Rng rng(mix_seed(seed, 0xC0DE));

  std::vector<Scene> scenes;
  scenes.reserve(size);
  for (std::size_t i = 0; i < size; ++i) scenes.push_back(random_scene(rng, vocab));

  // Global frequency and co-occurrence tables over the generated scenes.
  std::map<std::string, std::size_t> freq;
  std::map<std::string, std::map<std::string, std::size_t>> cooc;
  for (const auto& scene : scenes) {
    std::set<std::string> cats;
    for (const auto& o : scene.objects) cats.insert(o.category);
    for (const auto& a : cats) {
      ++freq[a];
      for (const auto& b : cats) {
        if (a != b) ++cooc[a][b];
      }
    }
  }

  std::vector<CorpusItem> corpus;
  for (std::size_t i = 0; i < size; ++i) {
    CorpusItem item;
    item.id = static_cast<int>(i);
    item.scene = scenes[i];
    item.query.kind = Query::Kind::Exists;
    item.gold_yes = (i % 2 == 0);
    if (item.gold_yes) {
      const auto& objs = item.scene.objects;
      item.query.category = objs[rng.next_below(objs.size())].category;
    } else {
      const std::vector<std::string> absent = absent_categories(item.scene, vocab);
      switch (setting) {
        case CorpusSetting::Random:
          item.query.category = absent[rng.next_below(absent.size())];
          break;
        case CorpusSetting::Popular: {
          // Weighted by global frequency (+1 smoothing).
          std::size_t total = 0;
          for (const auto& c : absent) total += freq[c] + 1;
          std::size_t pick = rng.next_below(total);
          for (const auto& c : absent) {
            const std::size_t w = freq[c] + 1;
            if (pick < w) {
              item.query.category = c;
              break;
            }
            pick -= w;
          }
          break;
        }
        case CorpusSetting::Adversarial: {
          // Strongest co-occurrence with any present category.
          std::string best;
          std::size_t best_w = 0;
          for (const auto& c : absent) {
            std::size_t w = 0;
            for (const auto& o : item.scene.objects) w += cooc[c][o.category];
            if (w > best_w || best.empty()) {
              best = c;
              best_w = w;
            }
          }
          item.query.category = best;
          break;
        }
      }
    }
    corpus.push_back(std::move(item));
  }
  return corpus;
}

nlohmann::json corpus_item_to_json(const CorpusItem& item) {
  return {{"id", item.id},
          {"scene", scene_to_json(item.scene)},
          {"query", {{"kind", "exists"}, {"category", item.query.category}}},
          {"gold_answer", item.gold_yes ? "yes" : "no"}};
}

CorpusItem corpus_item_from_json(const nlohmann::json& j) {
  CorpusItem item;
  item.id = j.at("id").get<int>();
  item.scene = scene_from_json(j.at("scene"));
  item.query.kind = Query::Kind::Exists;
  item.query.category = j.at("query").at("category").get<std::string>();
  item.gold_yes = j.at("gold_answer").get<std::string>() == "yes";
  return item;
}

// ---- pipelines ----------------------------------------------------------

std::size_t count_hallucinated_facts(const Response& response, const Scene& scene) {
  const FactSet grounded = scene_facts(scene);
  std::size_t n = 0;
  for (const Fact& f : response.facts) {
    if (grounded.count(f) == 0) ++n;
  }
  return n;
}

double reduce_tver_score(const std::vector<DecodeStep>& steps, ScoreReduction reduction) {
  std::vector<double> values;
  for (const auto& step : steps) {
    double step_max = 0.0;
    for (const auto& report : step.tver_reports) {
      for (const auto& hr : report.per_head) {
        const double t = std::isinf(hr.tver) ? kTverScoreCap : hr.tver;
        step_max = std::max(step_max, t);
      }
    }
    values.push_back(step_max);
  }
  if (values.empty()) return 0.0;
  switch (reduction) {
    case ScoreReduction::MaxTver:
      return *std::max_element(values.begin(), values.end());
    case ScoreReduction::MeanTver: {
      double s = 0.0;
      for (double v : values) s += v;
      return s / values.size();
    }
    case ScoreReduction::LastTver:
      return values.back();
  }
  return 0.0;
}

BenchmarkResult run_benchmark(const std::vector<CorpusItem>& corpus,
                              Pipeline pipeline, const BenchmarkConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("run_benchmark: empty corpus");
  ModelWeights weights = build_model(cfg.model);
  for (const auto& [tok, offset] : cfg.logit_bias) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= weights.out_bias.size()) {
      throw std::invalid_argument("run_benchmark: logit_bias token out of range");
    }
    weights.out_bias[tok] += offset;
  }

  BenchmarkResult result;
  std::vector<std::pair<std::set<std::string>, std::set<std::string>>> chair_inputs;
  for (const auto& item : corpus) {
    SimDecisionAgent decision(weights, cfg.introspection, cfg.max_tokens,
                              pipeline != Pipeline::Baseline);
    Response response;
    double score = 0.0;
    if (pipeline == Pipeline::FullInex) {
      SimTextReflectionAgent text(cfg.reflection);
      SimEditAgent edit;
      SimVisionReflectionAgent vision(cfg.orchestrator.gamma_clip);
      AgentSet agents{&decision, &text, &edit, &vision};
      RunResult run = run_inex(item.scene, item.query, agents, cfg.orchestrator);
      response = run.response;
      score = decision.session_peak_tver();
    } else {
      response = decision.generate(item.scene, item.query, std::nullopt);
      score = reduce_tver_score(decision.last_steps(), cfg.reduction);
    }

    const std::size_t halluc = count_hallucinated_facts(response, item.scene);
    result.hallucinated_facts += halluc;

    EvalRecord record;
    record.id = std::to_string(item.id);
    record.predicted = response.yes.value_or(false) ? "yes" : "no";
    record.gold = item.gold_yes ? "yes" : "no";
    record.score = score;
    record.hallucinated = halluc > 0;
    result.records.push_back(record);
    result.responses.push_back(response);

    std::set<std::string> asserted, gold;
    for (const Fact& f : response.facts) {
      if (f.slot == "exists") asserted.insert(f.subject);
    }
    for (const auto& o : item.scene.objects) gold.insert(o.category);
    chair_inputs.emplace_back(std::move(asserted), std::move(gold));
  }

  result.binary = binary_metrics(result.records);
  result.chair = chair_metrics(chair_inputs);
  result.calibration = ece(result.records, cfg.ece_bins);
  return result;
}

std::string pipeline_name(Pipeline pipeline) {
  switch (pipeline) {
    case Pipeline::Baseline: return "baseline";
    case Pipeline::InOnly: return "in_only";
    case Pipeline::FullInex: return "full_inex";
  }
  return "unknown";
}

std::string metrics_csv(const BenchmarkResult& result) {
  std::ostringstream out;
  out.precision(12);
  out << "metric,value\n";
  out << "accuracy," << result.binary.accuracy << "\n";
  out << "precision," << result.binary.precision << "\n";
  out << "recall," << result.binary.recall << "\n";
  out << "f1," << result.binary.f1 << "\n";
  out << "chair_s," << result.chair.chair_s << "\n";
  out << "chair_i," << result.chair.chair_i << "\n";
  out << "chair_recall," << result.chair.recall << "\n";
  out << "ece," << result.calibration.ece << "\n";
  out << "auroc," << result.calibration.auroc << "\n";
  out << "hallucinated_facts," << result.hallucinated_facts << "\n";
  return out.str();
}

std::string calibration_csv(const CalibrationReport& report) {
  std::ostringstream out;
  out.precision(12);
  out << "bin_lower,bin_upper,count,hallucination_rate\n";
  for (const auto& bin : report.bins) {
    out << bin.lower << "," << bin.upper << "," << bin.count << ","
        << bin.hallucination_rate << "\n";
  }
  return out.str();
}

}  // namespace inex

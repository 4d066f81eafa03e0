#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "inex/errors.hpp"
#include "inex/eval.hpp"
#include "inex/rng.hpp"

using namespace inex;

namespace {

EvalRecord rec(const std::string& pred, const std::string& gold,
               double score = 0.0, bool hallucinated = false) {
  EvalRecord r;
  r.predicted = pred;
  r.gold = gold;
  r.score = score;
  r.hallucinated = hallucinated;
  return r;
}

std::string corpus_dump(const std::vector<CorpusItem>& corpus) {
  std::ostringstream out;
  for (const auto& item : corpus) out << corpus_item_to_json(item).dump() << "\n";
  return out.str();
}

}  // namespace

TEST_CASE("binary metrics analytic cases") {
  const std::vector<EvalRecord> perfect = {rec("yes", "yes"), rec("no", "no")};
  const BinaryMetrics p = binary_metrics(perfect);
  CHECK(p.accuracy == doctest::Approx(1.0));
  CHECK(p.precision == doctest::Approx(1.0));
  CHECK(p.recall == doctest::Approx(1.0));
  CHECK(p.f1 == doctest::Approx(1.0));
  CHECK_FALSE(p.degenerate);

  const std::vector<EvalRecord> inverted = {rec("no", "yes"), rec("yes", "no")};
  const BinaryMetrics i = binary_metrics(inverted);
  CHECK(i.accuracy == doctest::Approx(0.0));
  CHECK(i.precision == doctest::Approx(0.0));
  CHECK(i.recall == doctest::Approx(0.0));
  CHECK(i.f1 == doctest::Approx(0.0));
  CHECK(i.degenerate);

  // TP=2 FP=1 FN=1 TN=2.
  const std::vector<EvalRecord> mixed = {rec("yes", "yes"), rec("yes", "yes"),
                                         rec("yes", "no"),  rec("no", "yes"),
                                         rec("no", "no"),   rec("no", "no")};
  const BinaryMetrics m = binary_metrics(mixed);
  CHECK(m.accuracy == doctest::Approx(4.0 / 6.0));
  CHECK(m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.recall == doctest::Approx(2.0 / 3.0));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(binary_metrics({}), std::invalid_argument);
}

TEST_CASE("binary metrics match a confusion-count oracle on random inputs") {
  Rng rng(81);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.next_below(200);
    std::vector<EvalRecord> rs;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const bool pred = rng.next_below(2) == 0;
      const bool gold = rng.next_below(2) == 0;
      rs.push_back(rec(pred ? "yes" : "no", gold ? "yes" : "no"));
      if (pred && gold) ++tp;
      else if (pred) ++fp;
      else if (gold) ++fn;
      else ++tn;
    }
    const BinaryMetrics m = binary_metrics(rs);
    CHECK(m.accuracy == doctest::Approx(static_cast<double>(tp + tn) / n));
    const double prec = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double recl = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    CHECK(m.precision == doctest::Approx(prec));
    CHECK(m.recall == doctest::Approx(recl));
    const double f1 = prec + recl > 0 ? 2 * prec * recl / (prec + recl) : 0.0;
    CHECK(m.f1 == doctest::Approx(f1));
  }
}

TEST_CASE("chair metrics analytic cases") {
  using Pair = std::pair<std::set<std::string>, std::set<std::string>>;
  const std::vector<Pair> perfect = {{{"dog"}, {"dog"}}};
  const ChairMetrics p = chair_metrics(perfect);
  CHECK(p.chair_s == doctest::Approx(0.0));
  CHECK(p.chair_i == doctest::Approx(0.0));
  CHECK(p.recall == doctest::Approx(1.0));

  const std::vector<Pair> half = {{{"dog", "cat"}, {"dog"}}};
  const ChairMetrics h = chair_metrics(half);
  CHECK(h.chair_s == doctest::Approx(1.0));
  CHECK(h.chair_i == doctest::Approx(0.5));
  CHECK(h.recall == doctest::Approx(1.0));

  CHECK_THROWS_AS(chair_metrics({}), std::invalid_argument);
}

TEST_CASE("chair metrics match set-arithmetic oracle on random inputs") {
  Rng rng(82);
  const std::vector<std::string> pool = {"dog", "cat", "car", "tree", "bird"};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.next_below(20);
    std::vector<std::pair<std::set<std::string>, std::set<std::string>>> rs;
    std::size_t mentions = 0, bad = 0, gold_total = 0, gold_hit = 0, resp_bad = 0;
    for (std::size_t k = 0; k < n; ++k) {
      std::set<std::string> a, g;
      for (const auto& c : pool) {
        if (rng.next_below(3) == 0) a.insert(c);
        if (rng.next_below(3) == 0) g.insert(c);
      }
      mentions += a.size();
      gold_total += g.size();
      bool any = false;
      for (const auto& c : a) {
        if (!g.count(c)) {
          ++bad;
          any = true;
        }
      }
      for (const auto& c : g) gold_hit += a.count(c);
      resp_bad += any;
      rs.emplace_back(std::move(a), std::move(g));
    }
    const ChairMetrics m = chair_metrics(rs);
    CHECK(m.chair_s == doctest::Approx(static_cast<double>(resp_bad) / n));
    if (mentions) {
      CHECK(m.chair_i == doctest::Approx(static_cast<double>(bad) / mentions));
    }
    if (gold_total) {
      CHECK(m.recall == doctest::Approx(static_cast<double>(gold_hit) / gold_total));
    }
  }
}

TEST_CASE("auroc analytic cases") {
  // Perfect separation: hallucinated scores all higher.
  std::vector<EvalRecord> perfect;
  for (int i = 0; i < 5; ++i) perfect.push_back(rec("no", "no", 0.1 * i, false));
  for (int i = 0; i < 5; ++i) perfect.push_back(rec("no", "no", 1.0 + 0.1 * i, true));
  CHECK(auroc(perfect) == doctest::Approx(1.0));

  std::vector<EvalRecord> ties = {rec("no", "no", 0.5, true), rec("no", "no", 0.5, false),
                                  rec("no", "no", 0.5, true), rec("no", "no", 0.5, false)};
  CHECK(auroc(ties) == doctest::Approx(0.5));

  CHECK_THROWS_AS(auroc({rec("no", "no", 0.1, true)}), UndefinedMetricError);
  CHECK_THROWS_AS(auroc({rec("no", "no", 0.1, false), rec("no", "no", 0.3, false)}),
                  UndefinedMetricError);
}

TEST_CASE("auroc matches the quadratic pairwise oracle") {
  Rng rng(83);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<EvalRecord> rs;
    const std::size_t n = 4 + rng.next_below(40);
    for (std::size_t k = 0; k < n; ++k) {
      // Coarse score grid forces ties.
      rs.push_back(rec("no", "no", rng.next_below(8) / 8.0, rng.next_below(2) == 0));
    }
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& r : rs) (r.hallucinated ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) continue;
    double u = 0.0;
    for (const auto& p : rs) {
      if (!p.hallucinated) continue;
      for (const auto& q : rs) {
        if (q.hallucinated) continue;
        if (p.score > q.score) u += 1.0;
        else if (p.score == q.score) u += 0.5;
      }
    }
    CHECK(auroc(rs) ==
          doctest::Approx(u / (static_cast<double>(n_pos) * n_neg)).epsilon(1e-12));
  }
}

TEST_CASE("ece analytic cases") {
  // Scores equal to outcomes: zero calibration error after normalization.
  std::vector<EvalRecord> exact;
  for (int i = 0; i < 10; ++i) exact.push_back(rec("no", "no", i < 5 ? 0.0 : 1.0, i >= 5));
  const CalibrationReport r = ece(exact, 10);
  CHECK(r.ece == doctest::Approx(0.0));
  CHECK_FALSE(r.degenerate);

  // Constant score 0.5 with hallucination rate 0.5: degenerate single bin, ece 0.
  std::vector<EvalRecord> constant;
  for (int i = 0; i < 10; ++i) constant.push_back(rec("no", "no", 0.5, i % 2 == 0));
  const CalibrationReport c = ece(constant, 10);
  CHECK(c.degenerate);
  REQUIRE(c.bins.size() == 1);
  CHECK(c.bins[0].count == 10);
  CHECK(c.ece == doctest::Approx(0.0));

  CHECK_THROWS_AS(ece({}, 10), std::invalid_argument);
  CHECK_THROWS_AS(ece({rec("no", "no")}, 0), std::invalid_argument);
}

TEST_CASE("ece matches a hand-rolled binning oracle") {
  Rng rng(84);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<EvalRecord> rs;
    const std::size_t n = 2 + rng.next_below(50);
    for (std::size_t k = 0; k < n; ++k) {
      rs.push_back(rec("no", "no", rng.next_uniform(), rng.next_below(2) == 0));
    }
    const std::size_t bins = 10;
    const CalibrationReport r = ece(rs, bins);

    double lo = rs[0].score, hi = rs[0].score;
    for (const auto& x : rs) {
      lo = std::min(lo, x.score);
      hi = std::max(hi, x.score);
    }
    if (hi == lo) continue;
    std::vector<std::size_t> count(bins, 0), halluc(bins, 0);
    std::vector<double> sum(bins, 0.0);
    for (const auto& x : rs) {
      const double s = (x.score - lo) / (hi - lo);
      std::size_t b = std::min(static_cast<std::size_t>(s * bins), bins - 1);
      ++count[b];
      halluc[b] += x.hallucinated;
      sum[b] += s;
    }
    double expected = 0.0;
    std::size_t total = 0;
    REQUIRE(r.bins.size() == bins);
    for (std::size_t b = 0; b < bins; ++b) {
      CHECK(r.bins[b].count == count[b]);
      total += r.bins[b].count;
      if (count[b]) {
        expected += (static_cast<double>(count[b]) / n) *
                    std::abs(sum[b] / count[b] -
                             static_cast<double>(halluc[b]) / count[b]);
      }
    }
    CHECK(total == n);
    CHECK(r.ece == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.ece >= 0.0);
    CHECK(r.ece <= 1.0);
  }
}

TEST_CASE("gen_corpus determinism and balance") {
  const Vocab vocab = Vocab::standard();
  for (const CorpusSetting setting :
       {CorpusSetting::Random, CorpusSetting::Popular, CorpusSetting::Adversarial}) {
    const auto a = gen_corpus(50, setting, 7, vocab);
    const auto b = gen_corpus(50, setting, 7, vocab);
    CHECK(corpus_dump(a) == corpus_dump(b));
    CHECK(corpus_dump(a) != corpus_dump(gen_corpus(50, setting, 8, vocab)));

    std::size_t yes = 0;
    for (const auto& item : a) {
      yes += item.gold_yes;
      // Label soundness: gold answer matches scene membership.
      CHECK(item.scene.has_category(item.query.category) == item.gold_yes);
    }
    CHECK(yes == 25);
  }
  CHECK_THROWS_AS(gen_corpus(0, CorpusSetting::Random, 1, vocab), std::invalid_argument);
}

TEST_CASE("adversarial negatives maximize co-occurrence with the scene") {
  const Vocab vocab = Vocab::standard();
  const auto corpus = gen_corpus(120, CorpusSetting::Adversarial, 3, vocab);

  // Rebuild the co-occurrence table the same way the generator defines it.
  std::map<std::string, std::map<std::string, std::size_t>> cooc;
  for (const auto& item : corpus) {
    std::set<std::string> cats;
    for (const auto& o : item.scene.objects) cats.insert(o.category);
    for (const auto& a : cats) {
      for (const auto& b : cats) {
        if (a != b) ++cooc[a][b];
      }
    }
  }
  for (const auto& item : corpus) {
    if (item.gold_yes) continue;
    auto weight = [&](const std::string& c) {
      std::size_t w = 0;
      for (const auto& o : item.scene.objects) w += cooc[c][o.category];
      return w;
    };
    const std::size_t chosen = weight(item.query.category);
    for (const auto& c : vocab.categories) {
      if (!item.scene.has_category(c)) CHECK(chosen >= weight(c));
    }
  }
}

TEST_CASE("corpus item JSON round trip") {
  const Vocab vocab = Vocab::standard();
  for (const auto& item : gen_corpus(20, CorpusSetting::Popular, 11, vocab)) {
    const CorpusItem back = corpus_item_from_json(corpus_item_to_json(item));
    CHECK(back.id == item.id);
    CHECK(back.scene == item.scene);
    CHECK(back.query.category == item.query.category);
    CHECK(back.gold_yes == item.gold_yes);
  }
}

TEST_CASE("reduce_tver_score caps the infinite sentinel") {
  DecodeStep step;
  TverReport report;
  TverHeadReport inf_head;
  inf_head.text_entropy = 1.0;
  inf_head.tver = std::numeric_limits<double>::infinity();
  inf_head.masked = true;
  TverHeadReport plain;
  plain.head = 1;
  plain.text_entropy = 1.0;
  plain.visual_entropy = 1.0;
  plain.tver = 1.0;
  report.per_head = {inf_head, plain};
  step.tver_reports.push_back(report);
  const double s = reduce_tver_score({step}, ScoreReduction::MaxTver);
  CHECK(s == doctest::Approx(kTverScoreCap));
  CHECK(std::isfinite(s));
  CHECK(reduce_tver_score({}, ScoreReduction::MaxTver) == doctest::Approx(0.0));
}

TEST_CASE("verification loop reduces hallucinated facts on a doctored model") {
  const Vocab vocab = Vocab::standard();
  const auto corpus = gen_corpus(20, CorpusSetting::Adversarial, 1, vocab);

  BenchmarkConfig cfg;
  cfg.logit_bias[vocab.category_token("cat")] = 8.0;
  cfg.logit_bias[vocab.category_token("car")] = 8.0;

  const BenchmarkResult base = run_benchmark(corpus, Pipeline::Baseline, cfg);
  const BenchmarkResult full = run_benchmark(corpus, Pipeline::FullInex, cfg);
  CHECK(full.hallucinated_facts <= base.hallucinated_facts);

  // CSV rendering is deterministic.
  const BenchmarkResult again = run_benchmark(corpus, Pipeline::Baseline, cfg);
  CHECK(metrics_csv(base) == metrics_csv(again));
  CHECK(calibration_csv(base.calibration) == calibration_csv(again.calibration));
  CHECK(metrics_csv(base).rfind("metric,value\n", 0) == 0);
}

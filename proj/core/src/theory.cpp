#include "inex/theory.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "inex/introspection.hpp"
#include "inex/rng.hpp"
#include "inex/toy_mllm.hpp"

namespace inex {

DiscretizationScheme make_scheme(std::size_t dim, std::size_t bits,
                                 std::uint64_t seed,
                                 const std::vector<Vec>& calibration_sample) {
  if (bits < 1 || bits > 8) {
    throw std::invalid_argument("make_scheme: bits must be in [1,8]");
  }
  DiscretizationScheme scheme;
  Rng rng(mix_seed(seed, 0xD15C));
  scheme.projection = Matrix(dim, bits);
  const double sigma = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& x : scheme.projection.data) x = sigma * rng.next_gaussian();

  scheme.thresholds = Vec(bits, 0.0);
  if (!calibration_sample.empty()) {
    for (std::size_t b = 0; b < bits; ++b) {
      Vec projected;
      projected.reserve(calibration_sample.size());
      for (const Vec& s : calibration_sample) {
        if (s.size() != dim) {
          throw std::invalid_argument("make_scheme: calibration dimension mismatch");
        }
        double p = 0.0;
        for (std::size_t j = 0; j < dim; ++j) p += s[j] * scheme.projection.at(j, b);
        projected.push_back(p);
      }
      std::sort(projected.begin(), projected.end());
      // Lower median keeps the threshold an observed value.
      scheme.thresholds[b] = projected[(projected.size() - 1) / 2];
    }
  }
  return scheme;
}

std::vector<int> discretize(const std::vector<Vec>& states,
                            const DiscretizationScheme& scheme) {
  const std::size_t dim = scheme.projection.rows;
  const std::size_t bits = scheme.bits();
  std::vector<int> out;
  out.reserve(states.size());
  for (const Vec& s : states) {
    if (s.size() != dim) {
      throw std::invalid_argument("discretize: dimension mismatch");
    }
    int code = 0;
    for (std::size_t b = 0; b < bits; ++b) {
      double p = 0.0;
      for (std::size_t j = 0; j < dim; ++j) p += s[j] * scheme.projection.at(j, b);
      // Boundary maps to 0.
      if (p > scheme.thresholds[b]) code |= 1 << b;
    }
    out.push_back(code);
  }
  return out;
}

double plugin_mi(const std::vector<int>& xs, const std::vector<int>& ys) {
  if (xs.size() != ys.size()) {
    throw std::invalid_argument("plugin_mi: length mismatch");
  }
  if (xs.empty()) {
    throw std::invalid_argument("plugin_mi: empty input");
  }
  const double n = static_cast<double>(xs.size());
  std::map<int, double> px, py;
  std::map<std::pair<int, int>, double> pxy;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    px[xs[i]] += 1.0 / n;
    py[ys[i]] += 1.0 / n;
    pxy[{xs[i], ys[i]}] += 1.0 / n;
  }
  double mi = 0.0;
  for (const auto& [key, p] : pxy) {
    mi += p * std::log(p / (px[key.first] * py[key.second]));
  }
  return mi;
}

double symbol_entropy(const std::vector<int>& xs) {
  if (xs.empty()) throw std::invalid_argument("symbol_entropy: empty input");
  const double n = static_cast<double>(xs.size());
  std::map<int, double> px;
  for (int x : xs) px[x] += 1.0 / n;
  double h = 0.0;
  for (const auto& [sym, p] : px) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double conditional_entropy(const std::vector<int>& ys, const std::vector<int>& hs) {
  const double ce = symbol_entropy(ys) - plugin_mi(ys, hs);
  return ce < 0.0 ? 0.0 : ce;
}

MiReport ib_diagnostic(const DiagnosticSamples& samples, double beta,
                       const DiscretizationScheme& scheme) {
  if (!(beta > 0.0)) throw std::invalid_argument("ib_diagnostic: beta must be > 0");
  const std::size_t n = samples.y_symbols.size();
  if (samples.x_symbols.size() != n || samples.z_symbols.size() != n ||
      samples.h_states.size() != n || samples.h_hat_states.size() != n) {
    throw std::invalid_argument("ib_diagnostic: inconsistent sample lengths");
  }

  const std::vector<int> h = discretize(samples.h_states, scheme);
  const std::vector<int> h_hat = discretize(samples.h_hat_states, scheme);

  MiReport report;
  report.beta = beta;
  report.mi_original = plugin_mi(h, samples.z_symbols);
  report.mi_enhanced = plugin_mi(h_hat, samples.z_symbols);
  report.cond_entropy_original = conditional_entropy(samples.y_symbols, h);
  report.cond_entropy_enhanced = conditional_entropy(samples.y_symbols, h_hat);
  report.ib_original =
      plugin_mi(h, samples.x_symbols) - beta * plugin_mi(h, samples.y_symbols);
  report.ib_enhanced =
      plugin_mi(h_hat, samples.x_symbols) - beta * plugin_mi(h_hat, samples.y_symbols);
  report.low_sample_warning = n < 4u * (1u << scheme.bits());
  return report;
}

DiagnosticSamples collect_samples(std::uint64_t config_seed, std::size_t num_items,
                                  double alpha) {
  ModelConfig mc;
  mc.num_layers = 2;
  mc.num_heads = 2;
  mc.model_dim = 16;
  mc.vocab_size = 64;
  mc.seed = config_seed;
  const ModelWeights weights = build_model(mc);
  const Vocab& vocab = mc.vocab;

  IntrospectionConfig icfg;
  icfg.gamma_tver = 1e-9;  // always trigger so the enhanced path is exercised
  icfg.alpha = alpha;

  Rng rng(mix_seed(config_seed, 0x5A5A));
  DiagnosticSamples samples;
  std::vector<Vec> query_means, z_means;

  for (std::size_t item = 0; item < num_items; ++item) {
    Scene scene;
    const std::size_t n_obj = 1 + rng.next_below(3);
    for (std::size_t o = 0; o < n_obj; ++o) {
      SceneObject obj;
      obj.id = static_cast<int>(o);
      obj.category = vocab.categories[rng.next_below(vocab.categories.size())];
      obj.pos = {static_cast<int>(rng.next_below(16)), static_cast<int>(rng.next_below(16))};
      scene.objects.push_back(obj);
    }
    const std::string qcat = vocab.categories[rng.next_below(vocab.categories.size())];
    const std::vector<int> query = {Vocab::kQueryExists, vocab.category_token(qcat)};
    const TokenStream stream = encode_inputs(scene, query, weights);

    const std::size_t d = mc.model_dim;
    Vec z_mean(d, 0.0), q_mean(d, 0.0);
    for (std::size_t i : stream.visual_indices) {
      for (std::size_t j = 0; j < d; ++j) z_mean[j] += stream.embeddings.at(i, j);
    }
    for (double& v : z_mean) v /= static_cast<double>(stream.visual_indices.size());
    for (std::size_t i : stream.textual_indices) {
      for (std::size_t j = 0; j < d; ++j) q_mean[j] += stream.embeddings.at(i, j);
    }
    for (double& v : q_mean) v /= static_cast<double>(stream.textual_indices.size());

    std::vector<DecodeStep> steps;
    inex_decode(stream, weights, icfg, 4, &steps);
    for (const auto& step : steps) {
      samples.h_states.push_back(step.h_original_final);
      samples.h_hat_states.push_back(step.h_enhanced_final);
      samples.y_symbols.push_back(step.token);
      z_means.push_back(z_mean);
      query_means.push_back(q_mean);
    }
  }

  // 2-bit condition alphabets: the plug-in estimator is heavily biased when
  // the joint alphabet is large relative to the sample count, so keep the
  // conditioning symbols coarse.
  const DiscretizationScheme z_scheme =
      make_scheme(mc.model_dim, 2, mix_seed(config_seed, 1), z_means);
  const DiscretizationScheme x_scheme =
      make_scheme(mc.model_dim, 2, mix_seed(config_seed, 2), query_means);
  samples.z_symbols = discretize(z_means, z_scheme);
  samples.x_symbols = discretize(query_means, x_scheme);
  return samples;
}

nlohmann::json mi_report_to_json(const MiReport& report) {
  return {{"mi_original", report.mi_original},
          {"mi_enhanced", report.mi_enhanced},
          {"cond_entropy_original", report.cond_entropy_original},
          {"cond_entropy_enhanced", report.cond_entropy_enhanced},
          {"ib_original", report.ib_original},
          {"ib_enhanced", report.ib_enhanced},
          {"beta", report.beta},
          {"low_sample_warning", report.low_sample_warning}};
}

}  // namespace inex

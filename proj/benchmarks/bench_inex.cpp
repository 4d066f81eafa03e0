#include <benchmark/benchmark.h>

#include "inex/introspection.hpp"
#include "inex/numerics.hpp"
#include "inex/rng.hpp"
#include "inex/toy_mllm.hpp"

namespace {

inex::Vec random_vec(std::size_t n, std::uint64_t seed) {
  inex::Rng rng(seed);
  inex::Vec v(n);
  for (double& x : v) x = rng.next_gaussian();
  return v;
}

void BM_Softmax(benchmark::State& state) {
  const inex::Vec logits = random_vec(static_cast<std::size_t>(state.range(0)), 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(inex::softmax(logits));
  }
}
BENCHMARK(BM_Softmax)->Arg(64)->Arg(256);

void BM_ComputeTver(benchmark::State& state) {
  const std::size_t heads = 4, seq = 24;
  inex::LayerTrace trace;
  trace.attn_rows = inex::Matrix(heads, seq);
  inex::Rng rng(11);
  for (std::size_t h = 0; h < heads; ++h) {
    double mass = 0.0;
    for (std::size_t i = 0; i < seq; ++i) {
      trace.attn_rows.at(h, i) = rng.next_uniform() + 1e-6;
      mass += trace.attn_rows.at(h, i);
    }
    for (std::size_t i = 0; i < seq; ++i) trace.attn_rows.at(h, i) /= mass;
  }
  std::vector<std::size_t> visual, textual;
  for (std::size_t i = 0; i < 8; ++i) visual.push_back(i);
  for (std::size_t i = 8; i < seq; ++i) textual.push_back(i);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        inex::compute_tver(trace, visual, textual, 0, 0.55));
  }
}
BENCHMARK(BM_ComputeTver);

void BM_DecodeStep(benchmark::State& state) {
  inex::ModelConfig mc;
  const inex::ModelWeights weights = inex::build_model(mc);
  inex::Scene scene;
  scene.objects.push_back({0, "dog", {}, {1, 2}});
  scene.objects.push_back({1, "car", {}, {5, 6}});
  const std::vector<int> query = {inex::Vocab::kQueryExists,
                                  mc.vocab.category_token("dog")};
  const inex::TokenStream stream = inex::encode_inputs(scene, query, weights);
  inex::IntrospectionConfig icfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(inex::inex_decode_step(stream, {}, weights, icfg));
  }
}
BENCHMARK(BM_DecodeStep);

}  // namespace

BENCHMARK_MAIN();

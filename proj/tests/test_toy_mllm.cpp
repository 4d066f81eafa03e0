#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "inex/errors.hpp"
#include "inex/rng.hpp"
#include "inex/toy_mllm.hpp"

using namespace inex;

namespace {

Scene two_object_scene() {
  Scene s;
  s.objects.push_back({0, "dog", {{"color", "red"}}, {1, 2}});
  s.objects.push_back({1, "car", {}, {5, 6}});
  return s;
}

// Independent reference forward pass: full causal attention for every
// position with plain nested loops, no shared helpers beyond the weights.
Vec reference_logits(const TokenStream& stream, const std::vector<int>& prior,
                     const ModelWeights& w) {
  const ModelConfig& c = w.config;
  const std::size_t d = c.model_dim;
  const std::size_t dk = c.head_dim();
  const std::size_t seq = stream.length() + prior.size();

  std::vector<Vec> x(seq, Vec(d));
  for (std::size_t p = 0; p < stream.length(); ++p) {
    for (std::size_t j = 0; j < d; ++j) x[p][j] = stream.embeddings.at(p, j);
  }
  for (std::size_t t = 0; t < prior.size(); ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      x[stream.length() + t][j] = w.embedding.at(prior[t], j);
    }
  }

  auto mat = [&](const Vec& v, const Matrix& m) {
    Vec out(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t col = 0; col < m.cols; ++col) out[col] += v[r] * m.at(r, col);
    }
    return out;
  };

  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const LayerWeights& lw = w.layers[l];
    std::vector<Vec> q(seq), k(seq), v(seq);
    for (std::size_t p = 0; p < seq; ++p) {
      q[p] = mat(x[p], lw.wq);
      k[p] = mat(x[p], lw.wk);
      v[p] = mat(x[p], lw.wv);
    }
    std::vector<Vec> next(seq, Vec(d));
    for (std::size_t p = 0; p < seq; ++p) {
      Vec concat(d, 0.0);
      for (std::size_t h = 0; h < c.num_heads; ++h) {
        std::vector<double> scores(p + 1);
        double mx = -1e300;
        for (std::size_t i = 0; i <= p; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < dk; ++j) s += q[p][h * dk + j] * k[i][h * dk + j];
          scores[i] = s / std::sqrt(static_cast<double>(dk));
          mx = std::max(mx, scores[i]);
        }
        double z = 0.0;
        for (std::size_t i = 0; i <= p; ++i) {
          scores[i] = std::exp(scores[i] - mx);
          z += scores[i];
        }
        for (std::size_t i = 0; i <= p; ++i) {
          for (std::size_t j = 0; j < dk; ++j) {
            concat[h * dk + j] += (scores[i] / z) * v[i][h * dk + j];
          }
        }
      }
      const Vec attn = mat(concat, lw.wo);
      Vec h_bar(d);
      for (std::size_t j = 0; j < d; ++j) h_bar[j] = attn[j] + x[p][j];
      Vec inner = mat(h_bar, lw.w1);
      for (std::size_t j = 0; j < inner.size(); ++j) {
        inner[j] = std::max(inner[j] + lw.b1[j], 0.0);
      }
      Vec ffn = mat(inner, lw.w2);
      for (std::size_t j = 0; j < d; ++j) next[p][j] = ffn[j] + lw.b2[j] + h_bar[j];
    }
    x = next;
  }

  Vec logits = mat(x[seq - 1], w.w_out);
  for (std::size_t j = 0; j < logits.size(); ++j) logits[j] += w.out_bias[j];
  return logits;
}

}  // namespace

TEST_CASE("build_model determinism and seed sensitivity") {
  ModelConfig c;
  const ModelWeights a = build_model(c);
  const ModelWeights b = build_model(c);
  CHECK(a.checksum() == b.checksum());

  ModelConfig c43 = c;
  c43.seed = 43;
  CHECK(build_model(c43).checksum() != a.checksum());
}

TEST_CASE("build_model shapes follow the config") {
  ModelConfig c;
  c.model_dim = 8;
  c.num_heads = 2;
  c.num_layers = 2;
  CHECK(c.head_dim() == 4);
  const ModelWeights w = build_model(c);
  CHECK(w.layers.size() == 2);
  CHECK(w.layers[0].wq.rows == 8);
  CHECK(w.layers[0].wq.cols == 8);
  CHECK(w.embedding.rows == c.vocab_size);
  CHECK(w.w_out.cols == c.vocab_size);
}

TEST_CASE("build_model rejects invalid configs") {
  ModelConfig bad;
  bad.model_dim = 30;  // not divisible by 4 heads
  CHECK_THROWS_AS(build_model(bad), std::invalid_argument);
  ModelConfig zero;
  zero.num_layers = 0;
  CHECK_THROWS_AS(build_model(zero), std::invalid_argument);
}

TEST_CASE("encode_inputs layout") {
  ModelConfig c;
  const ModelWeights w = build_model(c);
  const std::vector<int> query = {Vocab::kQueryExists, Vocab::kSep, Vocab::kYes};

  const TokenStream empty = encode_inputs(Scene{}, query, w);
  CHECK(empty.visual_indices.empty());
  CHECK(empty.textual_indices.size() == 3);

  const TokenStream ts = encode_inputs(two_object_scene(), query, w);
  CHECK(ts.visual_indices == std::vector<std::size_t>{0, 1});
  CHECK(ts.textual_indices == std::vector<std::size_t>{2, 3, 4});

  const TokenStream again = encode_inputs(two_object_scene(), query, w);
  CHECK(ts.embeddings.data == again.embeddings.data);
}

TEST_CASE("encode_inputs capacity guard") {
  ModelConfig c;
  c.max_visual_tokens = 2;
  const ModelWeights w = build_model(c);
  Scene big;
  for (int i = 0; i < 3; ++i) big.objects.push_back({i, "dog", {}, {0, 0}});
  CHECK_THROWS_AS(encode_inputs(big, {Vocab::kSep}, w), CapacityError);
}

TEST_CASE("forward_step with zeroed output head") {
  ModelConfig c;
  ModelWeights w = build_model(c);
  for (double& x : w.w_out.data) x = 0.0;
  const TokenStream ts = encode_inputs(two_object_scene(), {Vocab::kQueryExists}, w);
  const ForwardResult r = forward_step(ts, {}, w);
  for (double x : r.logits) CHECK(x == doctest::Approx(0.0));
}

TEST_CASE("forward_step attention rows are distributions") {
  ModelConfig c;
  const ModelWeights w = build_model(c);
  const TokenStream ts = encode_inputs(two_object_scene(),
                                       {Vocab::kQueryExists, Vocab::kSep}, w);
  const ForwardResult r = forward_step(ts, {Vocab::kYes}, w);
  REQUIRE(r.traces.size() == c.num_layers);
  for (const auto& trace : r.traces) {
    for (std::size_t h = 0; h < trace.attn_rows.rows; ++h) {
      double sum = 0.0;
      for (std::size_t i = 0; i < trace.attn_rows.cols; ++i) {
        const double a = trace.attn_rows.at(h, i);
        CHECK(a >= 0.0);
        sum += a;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("forward_step matches the naive reference oracle") {
  ModelConfig c;
  c.num_layers = 2;
  c.num_heads = 2;
  c.model_dim = 16;
  c.seed = 7;
  const ModelWeights w = build_model(c);
  const TokenStream ts = encode_inputs(two_object_scene(),
                                       {Vocab::kQueryExists, Vocab::kSep}, w);
  for (const std::vector<int> prior :
       {std::vector<int>{}, std::vector<int>{Vocab::kYes},
        std::vector<int>{Vocab::kYes, Vocab::kNo}}) {
    const ForwardResult got = forward_step(ts, prior, w);
    const Vec want = reference_logits(ts, prior, w);
    REQUIRE(got.logits.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(got.logits[i] == doctest::Approx(want[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("forward_step residual structure with zeroed attention") {
  ModelConfig c;
  ModelWeights w = build_model(c);
  // Zero output projections: the attention branch contributes nothing and
  // h_bar must equal the layer input exactly.
  for (auto& l : w.layers) {
    for (double& x : l.wo.data) x = 0.0;
  }
  const TokenStream ts = encode_inputs(two_object_scene(), {Vocab::kQueryExists}, w);
  const ForwardResult r = forward_step(ts, {}, w);
  const std::size_t d = c.model_dim;
  const std::size_t last = ts.length() - 1;
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(r.traces[l].h_bar[j] == r.states[l].at(last, j));
    }
  }
}

TEST_CASE("forward_step context overflow") {
  ModelConfig c;
  const ModelWeights w = build_model(c);
  const TokenStream ts = encode_inputs(Scene{}, {Vocab::kSep}, w);
  const std::vector<int> prior(kMaxContext, Vocab::kYes);
  CHECK_THROWS_AS(forward_step(ts, prior, w), CapacityError);
}

TEST_CASE("greedy_decode basics") {
  ModelConfig c;
  const ModelWeights w = build_model(c);
  const TokenStream ts = encode_inputs(two_object_scene(), {Vocab::kQueryExists}, w);
  CHECK(greedy_decode(ts, w, 1).size() == 1);
  CHECK(greedy_decode(ts, w, 6) == greedy_decode(ts, w, 6));
}

TEST_CASE("greedy_decode follows a doctored argmax") {
  ModelConfig c;
  ModelWeights w = build_model(c);
  w.out_bias[7] = 1e6;  // token 7 dominates every step
  const TokenStream ts = encode_inputs(two_object_scene(), {Vocab::kQueryExists}, w);
  const std::vector<int> out = greedy_decode(ts, w, 4);
  CHECK(out == std::vector<int>{7, 7, 7, 7});
}

TEST_CASE("weights serialization round trip") {
  ModelConfig c;
  c.num_layers = 2;
  c.model_dim = 16;
  c.num_heads = 2;
  c.seed = 99;
  const ModelWeights w = build_model(c);
  const std::string path = "toy_weights_test.bin";
  save_weights(w, path);
  const ModelWeights back = load_weights(path);
  CHECK(back.checksum() == w.checksum());
  CHECK(back.config.seed == 99);
  std::remove(path.c_str());
}

TEST_CASE("load_weights rejects a bad magic header") {
  const std::string path = "toy_weights_bad.bin";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("NOTMAGIC garbage", f);
    std::fclose(f);
  }
  CHECK_THROWS(load_weights(path));
  std::remove(path.c_str());
}

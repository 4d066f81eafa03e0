#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "inex/numerics.hpp"
#include "inex/scene.hpp"
#include "inex/vocab.hpp"

namespace inex {

struct ModelConfig {
  std::size_t num_layers = 4;
  std::size_t num_heads = 4;
  std::size_t model_dim = 32;
  std::size_t vocab_size = 64;
  std::size_t max_visual_tokens = 16;
  std::uint64_t seed = 42;
  Vocab vocab = Vocab::standard();  // symbol table behind the token ids

  std::size_t head_dim() const { return model_dim / num_heads; }
  std::size_t ffn_dim() const { return 2 * model_dim; }
  void validate() const;  // throws std::invalid_argument
};

struct LayerWeights {
  Matrix wq, wk, wv;  // d x d, viewed as H blocks of d x d_k
  Matrix wo;          // d x d
  Matrix w1;          // d x d_ff
  Vec b1;
  Matrix w2;          // d_ff x d
  Vec b2;
};

// Fully determined by (config, seed); never trained. The output head is tied
// to the embedding table so that logits score hidden states against token
// embeddings, which gives the visual tokens a direct grounding pathway.
struct ModelWeights {
  ModelConfig config;
  std::vector<LayerWeights> layers;
  Matrix embedding;       // vocab x d
  Matrix w_out;           // d x vocab
  Vec out_bias;           // vocab
  Matrix visual_align;    // d x d

  std::uint64_t checksum() const;
};

struct TokenStream {
  std::vector<std::size_t> visual_indices;
  std::vector<std::size_t> textual_indices;
  Matrix embeddings;  // seq x d

  std::size_t length() const { return embeddings.rows; }
};

// Capture for one layer at the current query position.
struct LayerTrace {
  Matrix attn_rows;     // H x seq, each row a softmax distribution
  Matrix head_outputs;  // H x d_k, per-head attention outputs before Concat*Wo
  Vec h_bar;            // post-attention state (after residual)
  Vec h_out;            // layer output state
};

struct ForwardResult {
  Vec logits;
  std::vector<LayerTrace> traces;      // one per layer
  std::vector<Matrix> states;          // states[0] = embeddings, states[l] = after layer l
};

inline constexpr std::size_t kMaxContext = 256;

ModelWeights build_model(const ModelConfig& config);

// Visual tokens occupy a contiguous prefix (one per scene object, in object
// order), query tokens follow. Throws CapacityError when the scene exceeds
// max_visual_tokens.
TokenStream encode_inputs(const Scene& scene, const std::vector<int>& query,
                          const ModelWeights& weights);

// Full forward pass for the next-token position, with per-layer trace capture.
ForwardResult forward_step(const TokenStream& stream,
                           const std::vector<int>& prior_tokens,
                           const ModelWeights& weights);

std::vector<int> greedy_decode(const TokenStream& stream,
                               const ModelWeights& weights,
                               std::size_t max_tokens);

// Versioned binary format: magic "TOYMLLM1", little-endian u64 dims, then
// row-major f64 payloads.
void save_weights(const ModelWeights& weights, const std::string& path);
ModelWeights load_weights(const std::string& path);

// Seeded hash embedding for one scene object (pre-alignment feature).
Vec object_feature(const SceneObject& object, const ModelWeights& weights);

struct AttentionOut {
  Matrix attn_rows;     // H x seq
  Matrix head_outputs;  // H x d_k
  Vec concat;           // d, Concat of head outputs before *Wo
};

// Attention for the final position of `context` (seq x d input states of one
// layer) with the last row replaced by `x_last`. Loop order matches
// forward_step exactly so recomputation is bit-identical.
AttentionOut attend_last(const Matrix& context, const Vec& x_last,
                         const LayerWeights& lw, const ModelConfig& cfg);

// Two-layer ReLU feed-forward of one layer.
Vec ffn_eval(const LayerWeights& lw, const Vec& h);

}  // namespace inex

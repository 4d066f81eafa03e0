#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "inex/numerics.hpp"
#include "inex/toy_mllm.hpp"

namespace inex {

// How Eq-style attention partitions become distributions before entropy:
// renormalize divides each partition by its mass; resoftmax re-exponentiates
// the already-softmaxed weights.
enum class TverPartitionMode { Renormalize, Resoftmax };

enum class LayerSelection { Dynamic, Fixed };

struct IntrospectionConfig {
  double gamma_tver = 0.55;
  double gamma_d = 0.2;
  double alpha = 0.5;   // introspection strength
  double alpha1 = 1.0;  // collaborative weight
  double alpha2 = 1.0;  // contrastive weight
  std::size_t top_k = 20;
  Activation activation = Activation::Relu;
  LayerSelection layer_selection = LayerSelection::Dynamic;
  std::size_t fixed_layer = 0;  // used when layer_selection == Fixed
  TverPartitionMode partition_mode = TverPartitionMode::Renormalize;

  void validate() const;  // throws std::invalid_argument
};

struct TverHeadReport {
  std::size_t head = 0;
  double text_entropy = 0.0;
  double visual_entropy = 0.0;
  double tver = 0.0;  // +inf sentinel when visual entropy vanishes alone
  bool masked = false;
};

struct TverReport {
  std::size_t layer = 0;
  std::vector<TverHeadReport> per_head;
  double gamma_tver = 0.0;
};

enum class FusionMode { Collaborative, Contrastive };

struct DecodeStep {
  Vec original_logits;
  Vec enhanced_logits;
  double distance = 0.0;
  FusionMode mode = FusionMode::Collaborative;
  Vec fused_logits;
  int token = 0;
  std::vector<TverReport> tver_reports;
  bool triggered = false;
  std::size_t injection_layer = 0;  // valid when triggered
  Vec h_original_final;  // H^L, final-layer hidden behind the original logits
  Vec h_enhanced_final;  // H_hat^L (== H^L when not triggered)
};

using HeadMask = std::vector<bool>;  // true = masked

// Finite stand-in for the +inf TVER sentinel wherever scores must stay
// normalizable.
inline constexpr double kTverScoreCap = 1000.0;
using FfnEvaluator = std::function<Vec(const Vec&)>;

// Per-head entropy partition of the current query position's attention row.
// Division-by-zero sentinel: visual entropy 0 with text entropy > 0 gives
// tver = +inf (always masked); both zero gives 0 (never masked).
TverReport compute_tver(const LayerTrace& trace,
                        const std::vector<std::size_t>& visual_indices,
                        const std::vector<std::size_t>& textual_indices,
                        std::size_t layer, double gamma_tver,
                        TverPartitionMode mode = TverPartitionMode::Renormalize);

// mask[h] true iff tver[h] >= gamma_tver.
HeadMask mask_heads(const TverReport& report, double gamma_tver);

// Masked heads contribute zero before Concat; result = Concat(..)*Wo.
Vec ve_mha(const Matrix& head_outputs, const HeadMask& mask, const Matrix& w_o);

// alpha * Delta(z | h_bar) + (1 - alpha) * ffn(h_bar).
Vec introspective_ffn(const Vec& h_bar, const std::vector<Vec>& z, double alpha,
                      Activation activation, const FfnEvaluator& layer_ffn);

struct EnhancedFinalState {
  Vec h_bar_final;   // after original MHA + residual
  Vec h_ve;          // after VE-MHA + residual
  Vec h_hat;         // after FFN + residual, drives the enhanced logits
};

// The three-step final layer: original MHA, then VE-MHA as an extra residual
// branch, then FFN. `context` holds the layer's input states for all
// positions; the last row is replaced by h_prev.
EnhancedFinalState enhanced_final_layer(const Vec& h_prev, const Matrix& context,
                                        const LayerWeights& final_layer,
                                        const HeadMask& mask,
                                        const ModelConfig& cfg,
                                        const FfnEvaluator& ffn);

struct FusionResult {
  Vec fused;
  FusionMode mode = FusionMode::Collaborative;
  double distance = 0.0;
};

FusionResult fuse_logits(const Vec& original, const Vec& enhanced,
                         const IntrospectionConfig& cfg);

// One full In-stage decode step: baseline forward with trace capture, TVER
// trigger scan, optional introspective rerun from the injection layer, and
// logit fusion. Greedy over the fused distribution.
DecodeStep inex_decode_step(const TokenStream& stream,
                            const std::vector<int>& prior_tokens,
                            const ModelWeights& weights,
                            const IntrospectionConfig& cfg);

std::vector<int> inex_decode(const TokenStream& stream,
                             const ModelWeights& weights,
                             const IntrospectionConfig& cfg,
                             std::size_t max_tokens,
                             std::vector<DecodeStep>* steps = nullptr);

nlohmann::json decode_step_to_json(const DecodeStep& step, std::size_t index);

}  // namespace inex

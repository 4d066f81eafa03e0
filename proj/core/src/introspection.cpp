#include "inex/introspection.hpp"

#include <cmath>
#include <stdexcept>

namespace inex {

namespace {

// Entropy of one attention-row partition under the selected mode. An empty
// partition has zero entropy by convention.
double partition_entropy(const Vec& weights, TverPartitionMode mode) {
  if (weights.empty()) return 0.0;
  switch (mode) {
    case TverPartitionMode::Renormalize: {
      double mass = 0.0;
      for (double w : weights) mass += w;
      if (mass <= 0.0) return 0.0;
      double h = 0.0;
      for (double w : weights) {
        const double p = w / mass;
        if (p > 0.0) h -= p * std::log(p);
      }
      return h < 0.0 ? 0.0 : h;
    }
    case TverPartitionMode::Resoftmax:
      return shannon_entropy(softmax(weights));
  }
  return 0.0;
}

bool head_masked(double tver, double gamma) {
  // An infinite threshold disables masking outright, including for the
  // +inf sentinel.
  if (std::isinf(gamma)) return false;
  return tver >= gamma;
}

}  // namespace

void IntrospectionConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("IntrospectionConfig: alpha must be in [0,1]");
  }
  if (!(gamma_tver > 0.0)) {
    throw std::invalid_argument("IntrospectionConfig: gamma_tver must be > 0");
  }
  if (top_k < 1) {
    throw std::invalid_argument("IntrospectionConfig: top_k must be >= 1");
  }
}

TverReport compute_tver(const LayerTrace& trace,
                        const std::vector<std::size_t>& visual_indices,
                        const std::vector<std::size_t>& textual_indices,
                        std::size_t layer, double gamma_tver,
                        TverPartitionMode mode) {
  if (textual_indices.empty()) {
    throw std::invalid_argument("compute_tver: empty textual partition");
  }
  const std::size_t seq = trace.attn_rows.cols;
  if (visual_indices.size() + textual_indices.size() != seq) {
    throw std::invalid_argument("compute_tver: index sets do not partition the row");
  }

  TverReport report;
  report.layer = layer;
  report.gamma_tver = gamma_tver;
  for (std::size_t h = 0; h < trace.attn_rows.rows; ++h) {
    Vec text_w, vis_w;
    text_w.reserve(textual_indices.size());
    vis_w.reserve(visual_indices.size());
    for (std::size_t i : textual_indices) text_w.push_back(trace.attn_rows.at(h, i));
    for (std::size_t i : visual_indices) vis_w.push_back(trace.attn_rows.at(h, i));

    TverHeadReport hr;
    hr.head = h;
    hr.text_entropy = partition_entropy(text_w, mode);
    hr.visual_entropy = partition_entropy(vis_w, mode);
    if (hr.visual_entropy > 0.0) {
      hr.tver = hr.text_entropy / hr.visual_entropy;
    } else if (hr.text_entropy > 0.0) {
      hr.tver = std::numeric_limits<double>::infinity();
    } else {
      hr.tver = 0.0;
    }
    hr.masked = head_masked(hr.tver, gamma_tver);
    report.per_head.push_back(hr);
  }
  return report;
}

HeadMask mask_heads(const TverReport& report, double gamma_tver) {
  HeadMask mask(report.per_head.size());
  for (std::size_t h = 0; h < report.per_head.size(); ++h) {
    mask[h] = head_masked(report.per_head[h].tver, gamma_tver);
  }
  return mask;
}

Vec ve_mha(const Matrix& head_outputs, const HeadMask& mask, const Matrix& w_o) {
  if (mask.size() != head_outputs.rows) {
    throw std::invalid_argument("ve_mha: mask length mismatch");
  }
  const std::size_t dk = head_outputs.cols;
  if (head_outputs.rows * dk != w_o.rows) {
    throw std::invalid_argument("ve_mha: projection shape mismatch");
  }
  Vec concat(w_o.rows, 0.0);
  for (std::size_t h = 0; h < head_outputs.rows; ++h) {
    if (mask[h]) continue;
    for (std::size_t j = 0; j < dk; ++j) concat[h * dk + j] = head_outputs.at(h, j);
  }
  return matvec(concat, w_o);
}

Vec introspective_ffn(const Vec& h_bar, const std::vector<Vec>& z, double alpha,
                      Activation activation, const FfnEvaluator& layer_ffn) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("introspective_ffn: alpha out of range");
  }
  if (alpha == 0.0) return layer_ffn(h_bar);
  if (z.empty()) {
    throw std::invalid_argument("introspective_ffn: alpha > 0 with empty Z");
  }
  const Vec retrieval = similarity_weighted_retrieval(h_bar, z, activation);
  if (alpha == 1.0) return retrieval;
  return add(scale(retrieval, alpha), scale(layer_ffn(h_bar), 1.0 - alpha));
}

EnhancedFinalState enhanced_final_layer(const Vec& h_prev, const Matrix& context,
                                        const LayerWeights& final_layer,
                                        const HeadMask& mask,
                                        const ModelConfig& cfg,
                                        const FfnEvaluator& ffn) {
  const AttentionOut ao = attend_last(context, h_prev, final_layer, cfg);
  EnhancedFinalState st;
  st.h_bar_final = add(matvec(ao.concat, final_layer.wo), h_prev);
  // VE-MHA recombines the same per-head outputs with masked heads zeroed.
  st.h_ve = add(ve_mha(ao.head_outputs, mask, final_layer.wo), st.h_bar_final);
  st.h_hat = add(ffn(st.h_ve), st.h_ve);
  return st;
}

FusionResult fuse_logits(const Vec& original, const Vec& enhanced,
                         const IntrospectionConfig& cfg) {
  FusionResult r;
  r.distance = manhattan_topk_distance(original, enhanced,
                                       std::min(cfg.top_k, original.size()));
  if (r.distance < cfg.gamma_d) {
    r.mode = FusionMode::Collaborative;
    r.fused = add(original, scale(enhanced, cfg.alpha1));
  } else {
    r.mode = FusionMode::Contrastive;
    r.fused = add(scale(original, 1.0 + cfg.alpha2), scale(enhanced, -cfg.alpha2));
  }
  return r;
}

DecodeStep inex_decode_step(const TokenStream& stream,
                            const std::vector<int>& prior_tokens,
                            const ModelWeights& weights,
                            const IntrospectionConfig& cfg) {
  cfg.validate();
  const ModelConfig& mc = weights.config;
  const std::size_t num_layers = mc.num_layers;
  const ForwardResult fr = forward_step(stream, prior_tokens, weights);

  // Generated tokens count as textual positions for the partition.
  std::vector<std::size_t> textual = stream.textual_indices;
  for (std::size_t t = 0; t < prior_tokens.size(); ++t) {
    textual.push_back(stream.length() + t);
  }

  DecodeStep step;
  step.original_logits = fr.logits;
  step.h_original_final = fr.traces.back().h_out;

  std::optional<std::size_t> trigger;
  for (std::size_t l = 0; l < num_layers; ++l) {
    TverReport report = compute_tver(fr.traces[l], stream.visual_indices, textual,
                                     l, cfg.gamma_tver, cfg.partition_mode);
    for (const auto& hr : report.per_head) {
      if (hr.masked && !trigger) trigger = l;
    }
    step.tver_reports.push_back(std::move(report));
  }

  // Without visual tokens there is no evidence to inject.
  if (!trigger || stream.visual_indices.empty()) {
    step.enhanced_logits = step.original_logits;
    step.h_enhanced_final = step.h_original_final;
    const FusionResult fu = fuse_logits(step.original_logits, step.enhanced_logits, cfg);
    step.distance = fu.distance;
    step.mode = fu.mode;
    step.fused_logits = fu.fused;
    step.token = static_cast<int>(argmax(step.fused_logits));
    return step;
  }

  step.triggered = true;
  const std::size_t trigger_layer = *trigger;
  const std::size_t injection = cfg.layer_selection == LayerSelection::Dynamic
                                    ? trigger_layer
                                    : std::min(cfg.fixed_layer, num_layers - 1);
  step.injection_layer = injection;
  const HeadMask mask = mask_heads(step.tver_reports[trigger_layer], cfg.gamma_tver);

  std::vector<Vec> z;
  const std::size_t d = mc.model_dim;
  for (std::size_t i : stream.visual_indices) {
    z.emplace_back(stream.embeddings.data.begin() + i * d,
                   stream.embeddings.data.begin() + (i + 1) * d);
  }

  const std::size_t seq = fr.states[0].rows;
  Vec cur(fr.states[injection].data.begin() + (seq - 1) * d,
          fr.states[injection].data.begin() + seq * d);

  for (std::size_t l = injection; l + 1 < num_layers; ++l) {
    const LayerWeights& lw = weights.layers[l];
    const AttentionOut ao = attend_last(fr.states[l], cur, lw, mc);
    const Vec h_bar = add(matvec(ao.concat, lw.wo), cur);
    const FfnEvaluator plain = [&lw](const Vec& h) { return ffn_eval(lw, h); };
    const Vec ffn_part = (l == injection)
                             ? introspective_ffn(h_bar, z, cfg.alpha, cfg.activation, plain)
                             : plain(h_bar);
    cur = add(ffn_part, h_bar);
  }

  const LayerWeights& last_lw = weights.layers[num_layers - 1];
  const FfnEvaluator final_ffn =
      (injection == num_layers - 1)
          ? FfnEvaluator([&](const Vec& h) {
              return introspective_ffn(h, z, cfg.alpha, cfg.activation,
                                       [&](const Vec& hh) { return ffn_eval(last_lw, hh); });
            })
          : FfnEvaluator([&](const Vec& h) { return ffn_eval(last_lw, h); });
  const EnhancedFinalState ef = enhanced_final_layer(
      cur, fr.states[num_layers - 1], last_lw, mask, mc, final_ffn);
  step.h_enhanced_final = ef.h_hat;
  step.enhanced_logits = add(matvec(ef.h_hat, weights.w_out), weights.out_bias);

  const FusionResult fu = fuse_logits(step.original_logits, step.enhanced_logits, cfg);
  step.distance = fu.distance;
  step.mode = fu.mode;
  step.fused_logits = fu.fused;
  step.token = static_cast<int>(argmax(step.fused_logits));
  return step;
}

std::vector<int> inex_decode(const TokenStream& stream,
                             const ModelWeights& weights,
                             const IntrospectionConfig& cfg,
                             std::size_t max_tokens,
                             std::vector<DecodeStep>* steps) {
  if (max_tokens < 1) throw std::invalid_argument("inex_decode: max_tokens < 1");
  std::vector<int> out;
  for (std::size_t t = 0; t < max_tokens; ++t) {
    DecodeStep step = inex_decode_step(stream, out, weights, cfg);
    out.push_back(step.token);
    const bool done = step.token == Vocab::kEos;
    if (steps) steps->push_back(std::move(step));
    if (done) break;
  }
  return out;
}

nlohmann::json decode_step_to_json(const DecodeStep& step, std::size_t index) {
  nlohmann::json tver = nlohmann::json::array();
  for (const auto& report : step.tver_reports) {
    for (const auto& hr : report.per_head) {
      nlohmann::json value;
      if (std::isinf(hr.tver)) {
        value = "inf";
      } else {
        value = hr.tver;
      }
      tver.push_back({report.layer, hr.head, value, hr.masked});
    }
  }
  return {{"step", index},
          {"tver", tver},
          {"d_t", step.distance},
          {"mode", step.mode == FusionMode::Collaborative ? "collaborative" : "contrastive"},
          {"token", step.token}};
}

}  // namespace inex

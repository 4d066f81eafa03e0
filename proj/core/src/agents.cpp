#include "inex/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "inex/errors.hpp"
#include "inex/rng.hpp"

namespace inex {

void ReflectionConfig::validate() const {
  if (perspectives < 1 || perspectives > 4) {
    throw std::invalid_argument("ReflectionConfig: perspectives must be in [1,4]");
  }
  if (ensemble_size < 1) {
    throw std::invalid_argument("ReflectionConfig: ensemble_size must be >= 1");
  }
}

std::vector<int> Query::tokens(const Vocab& vocab) const {
  switch (kind) {
    case Kind::Exists:
      return {Vocab::kQueryExists, vocab.category_token(category)};
    case Kind::Describe:
      return {Vocab::kQueryDescribe};
  }
  return {};
}

std::string Query::str() const {
  return kind == Kind::Exists ? "exists:" + category : "describe";
}

std::vector<Fact> extract_facts(const std::vector<int>& tokens, const Vocab& vocab) {
  std::vector<Fact> facts;
  FactSet seen;
  std::string current;
  for (int tok : tokens) {
    if (tok == Vocab::kEos) break;
    if (vocab.is_category(tok)) {
      current = vocab.category_name(tok);
      Fact f{current, "exists", "true"};
      if (seen.insert(f).second) facts.push_back(f);
    } else if (vocab.is_color(tok) && !current.empty()) {
      Fact f{current, "color", vocab.color_name(tok)};
      if (seen.insert(f).second) facts.push_back(f);
    } else if (vocab.is_action(tok) && !current.empty()) {
      Fact f{current, "action", vocab.action_name(tok)};
      if (seen.insert(f).second) facts.push_back(f);
    }
  }
  return facts;
}

SimDecisionAgent::SimDecisionAgent(const ModelWeights& weights,
                                   IntrospectionConfig cfg, std::size_t max_tokens,
                                   bool use_introspection)
    : weights_(weights),
      cfg_(cfg),
      max_tokens_(max_tokens),
      use_introspection_(use_introspection) {
  if (!use_introspection_) {
    // An infinite trigger threshold makes In-stage decoding coincide with
    // greedy decoding while still capturing TVER traces for scoring.
    cfg_.gamma_tver = std::numeric_limits<double>::infinity();
  }
}

Response SimDecisionAgent::generate(const Scene& scene, const Query& query,
                                    const std::optional<Feedback>& feedback) {
  const Vocab& vocab = weights_.config.vocab;
  std::vector<int> context = query.tokens(vocab);
  if (feedback) {
    context.push_back(Vocab::kFeedback);
    std::size_t added = 0;
    for (const auto& item : feedback->items) {
      if (item.tag == "conflict") banned_.insert(item.fact);
      const int tok = vocab.category_token(item.fact.subject);
      if (tok >= Vocab::kNumSpecials && added < 4) {
        context.push_back(tok);
        ++added;
      }
    }
  }

  const TokenStream stream = encode_inputs(scene, context, weights_);
  last_steps_.clear();
  const std::vector<int> out = inex_decode(stream, weights_, cfg_, max_tokens_, &last_steps_);

  for (const auto& step : last_steps_) {
    for (const auto& report : step.tver_reports) {
      for (const auto& hr : report.per_head) {
        const double t = std::isinf(hr.tver) ? kTverScoreCap : hr.tver;
        session_peak_tver_ = std::max(session_peak_tver_, t);
      }
    }
  }

  Response response;
  response.tokens = out;
  for (const Fact& f : extract_facts(out, vocab)) {
    if (banned_.count(f) == 0) response.facts.push_back(f);
  }
  if (query.kind == Query::Kind::Exists) {
    response.yes = std::any_of(response.facts.begin(), response.facts.end(),
                               [&](const Fact& f) {
                                 return f.slot == "exists" && f.subject == query.category;
                               });
  }
  return response;
}

namespace {

// One perspective check: conflicts for every relevant response fact absent
// from the caption set.
std::vector<Evidence> check_perspective(const std::string& perspective,
                                        const FactSet& caption_facts,
                                        const Response& response) {
  std::vector<Evidence> conflicts;
  auto relevant = [&](const Fact& f) {
    if (perspective == "existence") {
      return f.slot == "exists" || (f.slot != "color" && f.slot != "action");
    }
    if (perspective == "color") return f.slot == "color";
    if (perspective == "action") return f.slot == "action";
    if (perspective == "count") return f.slot == "exists";
    return false;
  };
  for (const Fact& f : response.facts) {
    if (relevant(f) && caption_facts.count(f) == 0) {
      conflicts.push_back({f, "conflict"});
    }
  }
  return conflicts;
}

const std::vector<std::string>& all_perspectives() {
  static const std::vector<std::string> ps = {"existence", "color", "action", "count"};
  return ps;
}

}  // namespace

Verdict SimTextReflectionAgent::verify(const CaptionSet& captions,
                                       const Response& response) {
  const FactSet caption_facts = captions.facts();
  std::vector<std::string> active(all_perspectives().begin(),
                                  all_perspectives().begin() + cfg_.perspectives);

  // Each ensemble repetition re-evaluates the perspectives in a seeded
  // shuffled order; the checks themselves are deterministic, so the ensemble
  // shape mirrors a temperature-sampled reflector without losing exactness.
  std::vector<int> support_count(active.size(), 0);
  std::vector<std::vector<Evidence>> evidence(active.size());
  for (std::size_t rep = 0; rep < cfg_.ensemble_size; ++rep) {
    std::vector<std::size_t> order(active.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(cfg_.seed, rep));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.next_below(i)]);
    }
    for (std::size_t idx : order) {
      auto conflicts = check_perspective(active[idx], caption_facts, response);
      if (conflicts.empty()) ++support_count[idx];
      if (rep == 0) evidence[idx] = std::move(conflicts);
    }
  }

  Verdict verdict;
  verdict.supported = true;
  FactSet seen;
  for (std::size_t i = 0; i < active.size(); ++i) {
    // Majority vote; ties resolve to unsupported.
    const bool vote = 2 * support_count[i] > static_cast<int>(cfg_.ensemble_size);
    verdict.votes.push_back({active[i], vote, evidence[i]});
    if (!vote) verdict.supported = false;
    for (const auto& ev : evidence[i]) {
      if (seen.insert(ev.fact).second) verdict.evidence.push_back(ev);
    }
  }
  return verdict;
}

Scene SimEditAgent::edit(const Response& response, const Scene& scene) {
  Scene work = scene;
  int next_id = 0;
  for (const auto& o : work.objects) next_id = std::max(next_id, o.id + 1);

  SceneEdit edit;
  auto ensure_object = [&](const std::string& category) -> int {
    for (const auto& o : work.objects) {
      if (o.category == category) return o.id;
    }
    SceneObject obj;
    obj.id = next_id++;
    obj.category = category;
    edit.ops.push_back({EditOp::Kind::Insert, obj, 0, "", ""});
    work.objects.push_back(obj);
    return obj.id;
  };

  for (const Fact& f : response.facts) {
    if (f.subject.empty() || f.slot.empty()) {
      throw InvalidEditError("edit: unparseable assertion");
    }
    if (f.slot == "exists") {
      ensure_object(f.subject);
    } else {
      const int id = ensure_object(f.subject);
      EditOp op;
      op.kind = EditOp::Kind::SetAttribute;
      op.object_id = id;
      op.slot = f.slot;
      op.value = f.value;
      edit.ops.push_back(op);
      for (auto& o : work.objects) {
        if (o.id == id) o.attributes[f.slot] = f.value;
      }
    }
  }
  return apply_edit(scene, edit);
}

Verdict SimVisionReflectionAgent::verify(const Scene& original, const Scene& edited) {
  const double sim = scene_similarity(original, edited);
  Verdict verdict;
  verdict.supported = sim >= gamma_clip_;
  const FactSet fo = scene_facts(original);
  const FactSet fe = scene_facts(edited);
  for (const Fact& f : fe) {
    if (fo.count(f) == 0) verdict.evidence.push_back({f, "conflict"});
  }
  for (const Fact& f : fo) {
    if (fe.count(f) == 0) verdict.evidence.push_back({f, "missing"});
  }
  return verdict;
}

Response ScriptedDecisionAgent::generate(const Scene&, const Query&,
                                         const std::optional<Feedback>& feedback) {
  if (!feedback) {
    if (initial_done_) throw ReplayError("scripted decision agent: duplicate initial call");
    initial_done_ = true;
    return initial;
  }
  if (feedback->source == Feedback::Source::Text) {
    if (text_calls_ >= on_text_feedback.size()) {
      throw ReplayError("scripted decision agent: text script exhausted");
    }
    return on_text_feedback[text_calls_++];
  }
  if (vision_calls_ >= on_vision_feedback.size()) {
    throw ReplayError("scripted decision agent: vision script exhausted");
  }
  return on_vision_feedback[vision_calls_++];
}

Verdict ScriptedTextReflectionAgent::verify(const CaptionSet&, const Response&) {
  if (calls_ >= verdicts.size()) {
    throw ReplayError("scripted text reflection: script exhausted");
  }
  return verdicts[calls_++];
}

Verdict ScriptedVisionReflectionAgent::verify(const Scene&, const Scene&) {
  if (calls_ >= verdicts.size()) {
    throw ReplayError("scripted vision reflection: script exhausted");
  }
  return verdicts[calls_++];
}

nlohmann::json response_to_json(const Response& response) {
  nlohmann::json facts = nlohmann::json::array();
  for (const Fact& f : response.facts) {
    facts.push_back({f.subject, f.slot, f.value});
  }
  nlohmann::json j = {{"tokens", response.tokens}, {"facts", facts}};
  if (response.yes) {
    j["yes"] = *response.yes;
  } else {
    j["yes"] = nullptr;
  }
  return j;
}

Response response_from_json(const nlohmann::json& j) {
  Response r;
  r.tokens = j.value("tokens", std::vector<int>{});
  for (const auto& jf : j.at("facts")) {
    r.facts.push_back({jf[0].get<std::string>(), jf[1].get<std::string>(),
                       jf[2].get<std::string>()});
  }
  if (j.contains("yes") && !j["yes"].is_null()) r.yes = j["yes"].get<bool>();
  return r;
}

ScriptedDecisionAgent ScriptedDecisionAgent::from_json(const nlohmann::json& j,
                                                       const Vocab&) {
  ScriptedDecisionAgent agent;
  agent.initial = response_from_json(j.at("initial"));
  for (const auto& r : j.value("text", nlohmann::json::array())) {
    agent.on_text_feedback.push_back(response_from_json(r));
  }
  for (const auto& r : j.value("vision", nlohmann::json::array())) {
    agent.on_vision_feedback.push_back(response_from_json(r));
  }
  return agent;
}

}  // namespace inex

#include "inex/orchestrator.hpp"

#include <stdexcept>

namespace inex {

namespace {

std::string verdict_summary(const Verdict& verdict) {
  std::string s = verdict.supported ? "supported" : "unsupported";
  for (const auto& ev : verdict.evidence) {
    s += ";" + ev.tag + ":" + ev.fact.str();
  }
  return s;
}

std::string response_summary(const Response& response) {
  std::string s = "facts=";
  for (const auto& f : response.facts) s += f.str() + ",";
  if (response.yes) s += response.yes.value() ? " yes" : " no";
  return s;
}

}  // namespace

void OrchestratorConfig::validate() const {
  if (max_iterations < 1) {
    throw std::invalid_argument("OrchestratorConfig: max_iterations must be >= 1");
  }
  if (!(gamma_clip >= 0.0 && gamma_clip <= 1.0)) {
    throw std::invalid_argument("OrchestratorConfig: gamma_clip must be in [0,1]");
  }
}

RunResult run_inex(const Scene& scene, const Query& query, const AgentSet& agents,
                   const OrchestratorConfig& cfg) {
  cfg.validate();
  if (!agents.decision || !agents.text_reflection || !agents.edit ||
      !agents.vision_reflection) {
    throw std::invalid_argument("run_inex: missing agent");
  }

  RunResult result;
  Transcript& tr = result.transcript;
  auto log = [&tr](const std::string& label, std::size_t iter, std::string payload) {
    tr.events.push_back({label, iter, std::move(payload)});
  };

  const CaptionSet captions = derive_captions(scene);
  log("init", 0, "captions=" + std::to_string(captions.captions.size()));

  try {
  Response y = agents.decision->generate(scene, query, std::nullopt);
  log("initial_generation", 0, response_summary(y));

  Verdict tv = agents.text_reflection->verify(captions, y);
  log("text_verify", 0, verdict_summary(tv));
  if (tv.supported) {
    tr.outcome = Outcome::AcceptedInitial;
    tr.final_response = y;
    result.response = y;
    return result;
  }

  // Algorithm line 6 reads y_i before the loop starts; only y_0 exists at
  // that point, so the first text feedback derives from y_0.
  Feedback f_t{Feedback::Source::Text, tv.evidence};
  log("text_feedback", 0, verdict_summary(tv));

  for (std::size_t i = 1; i <= cfg.max_iterations; ++i) {
    y = agents.decision->generate(scene, query, f_t);
    log("decision_text", i, response_summary(y));

    const Scene edited = agents.edit->edit(y, scene);
    log("image_edit", i, "objects=" + std::to_string(edited.objects.size()));

    const Verdict vv = agents.vision_reflection->verify(scene, edited);
    log("vision_verify", i, verdict_summary(vv));
    if (vv.supported) {
      tr.outcome = Outcome::AcceptedVision;
      tr.final_response = y;
      result.response = y;
      return result;
    }

    Feedback f_v{Feedback::Source::Vision, vv.evidence};
    log("vision_feedback", i, verdict_summary(vv));

    y = agents.decision->generate(scene, query, f_v);
    log("decision_vision", i, response_summary(y));

    tv = agents.text_reflection->verify(captions, y);
    log("text_verify", i, verdict_summary(tv));
    if (tv.supported) {
      tr.outcome = Outcome::AcceptedText;
      tr.final_response = y;
      result.response = y;
      return result;
    }
    f_t = Feedback{Feedback::Source::Text, tv.evidence};
    log("text_feedback", i, verdict_summary(tv));
  }

  tr.outcome = Outcome::IterationLimit;
  tr.final_response = y;
  result.response = y;
  return result;
  } catch (const OrchestratorError&) {
    throw;
  } catch (const std::exception& e) {
    log("error", 0, e.what());
    throw OrchestratorError(e.what(), tr);
  }
}

bool replay(const Transcript& transcript, const Scene& scene, const Query& query,
            const AgentSet& scripted_agents, const OrchestratorConfig& cfg) {
  const RunResult rerun = run_inex(scene, query, scripted_agents, cfg);
  return rerun.transcript == transcript;
}

std::string outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::AcceptedInitial: return "accepted_initial";
    case Outcome::AcceptedVision: return "accepted_vision";
    case Outcome::AcceptedText: return "accepted_text";
    case Outcome::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

nlohmann::json transcript_to_json_lines(const Transcript& transcript) {
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& ev : transcript.events) {
    lines.push_back({{"label", ev.label}, {"iteration", ev.iteration}, {"payload", ev.payload}});
  }
  lines.push_back({{"summary", true},
                   {"outcome", outcome_name(transcript.outcome)},
                   {"final_response", response_to_json(transcript.final_response)}});
  return lines;
}

}  // namespace inex

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "inex/agents.hpp"
#include "inex/scene.hpp"

namespace inex {

struct OrchestratorConfig {
  std::size_t max_iterations = 4;
  double gamma_clip = 0.9;

  void validate() const;
};

struct TranscriptEvent {
  std::string label;      // init, initial_generation, text_verify, ...
  std::size_t iteration;  // 0 for pre-loop events
  std::string payload;    // short human-readable summary

  bool operator==(const TranscriptEvent&) const = default;
};

enum class Outcome { AcceptedInitial, AcceptedVision, AcceptedText, IterationLimit };

struct Transcript {
  std::vector<TranscriptEvent> events;
  Outcome outcome = Outcome::IterationLimit;
  Response final_response;

  bool operator==(const Transcript&) const = default;
};

struct AgentSet {
  DecisionAgent* decision = nullptr;
  TextReflectionAgent* text_reflection = nullptr;
  EditAgent* edit = nullptr;
  VisionReflectionAgent* vision_reflection = nullptr;
};

struct RunResult {
  Response response;
  Transcript transcript;
};

// Raised when an agent fails mid-run; carries the transcript up to the
// failure point.
struct OrchestratorError : std::runtime_error {
  Transcript transcript;
  OrchestratorError(const std::string& msg, Transcript tr)
      : std::runtime_error(msg), transcript(std::move(tr)) {}
};

// The Ex-stage alternating verification/refinement loop. Always terminates
// within 1 + 2*I decision calls, I edits, I vision verifications and I + 1
// text verifications.
RunResult run_inex(const Scene& scene, const Query& query, const AgentSet& agents,
                   const OrchestratorConfig& cfg);

// Re-runs with (reset) scripted agents and compares transcripts.
bool replay(const Transcript& transcript, const Scene& scene, const Query& query,
            const AgentSet& scripted_agents, const OrchestratorConfig& cfg);

nlohmann::json transcript_to_json_lines(const Transcript& transcript);
std::string outcome_name(Outcome outcome);

}  // namespace inex

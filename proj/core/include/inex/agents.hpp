#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "inex/introspection.hpp"
#include "inex/scene.hpp"
#include "inex/toy_mllm.hpp"
#include "inex/vocab.hpp"

namespace inex {

struct Query {
  enum class Kind { Exists, Describe };
  Kind kind = Kind::Exists;
  std::string category;  // for Exists

  std::vector<int> tokens(const Vocab& vocab) const;
  std::string str() const;
};

struct Response {
  std::vector<int> tokens;
  std::vector<Fact> facts;
  std::optional<bool> yes;  // answer for binary queries

  bool operator==(const Response&) const = default;
};

struct Evidence {
  Fact fact;
  std::string tag;  // "conflict" (asserted but ungrounded) or "missing"

  bool operator==(const Evidence&) const = default;
};

struct PerspectiveVote {
  std::string perspective;
  bool vote = false;
  std::vector<Evidence> evidence;
};

struct Verdict {
  bool supported = false;
  std::vector<Evidence> evidence;
  std::vector<PerspectiveVote> votes;
};

struct Feedback {
  enum class Source { Text, Vision };
  Source source = Source::Text;
  std::vector<Evidence> items;
};

struct ReflectionConfig {
  std::size_t perspectives = 4;  // <= 4
  std::size_t ensemble_size = 3;
  double temperature = 0.7;
  std::uint64_t seed = 0;

  void validate() const;
};

class DecisionAgent {
 public:
  virtual ~DecisionAgent() = default;
  virtual Response generate(const Scene& scene, const Query& query,
                            const std::optional<Feedback>& feedback) = 0;
};

class TextReflectionAgent {
 public:
  virtual ~TextReflectionAgent() = default;
  virtual Verdict verify(const CaptionSet& captions, const Response& response) = 0;
};

class EditAgent {
 public:
  virtual ~EditAgent() = default;
  virtual Scene edit(const Response& response, const Scene& scene) = 0;
};

class VisionReflectionAgent {
 public:
  virtual ~VisionReflectionAgent() = default;
  virtual Verdict verify(const Scene& original, const Scene& edited) = 0;
};

// Extracts grounded fact triples from a symbol-token stream: a category token
// opens a subject, following color/action tokens attach attributes.
std::vector<Fact> extract_facts(const std::vector<int>& tokens, const Vocab& vocab);

// Decision agent backed by the toy model with In-stage decoding. Feedback
// evidence is appended to the textual context before decoding, and facts a
// verifier has flagged as conflicting are dropped from later assertions
// (the agent defers to feedback).
class SimDecisionAgent : public DecisionAgent {
 public:
  SimDecisionAgent(const ModelWeights& weights, IntrospectionConfig cfg,
                   std::size_t max_tokens = 8, bool use_introspection = true);

  Response generate(const Scene& scene, const Query& query,
                    const std::optional<Feedback>& feedback) override;

  // TVER reports of the most recent generate() call, for uncertainty scoring.
  const std::vector<DecodeStep>& last_steps() const { return last_steps_; }
  // Highest per-head TVER seen across every generate() call of this session.
  double session_peak_tver() const { return session_peak_tver_; }
  void reset() {
    banned_.clear();
    session_peak_tver_ = 0.0;
  }

 private:
  const ModelWeights& weights_;
  IntrospectionConfig cfg_;
  std::size_t max_tokens_;
  bool use_introspection_;
  FactSet banned_;
  std::vector<DecodeStep> last_steps_;
  double session_peak_tver_ = 0.0;
};

// Multi-perspective ensemble verifier over {existence, color, action, count}.
class SimTextReflectionAgent : public TextReflectionAgent {
 public:
  explicit SimTextReflectionAgent(ReflectionConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  Verdict verify(const CaptionSet& captions, const Response& response) override;

 private:
  ReflectionConfig cfg_;
};

class SimEditAgent : public EditAgent {
 public:
  Scene edit(const Response& response, const Scene& scene) override;
};

class SimVisionReflectionAgent : public VisionReflectionAgent {
 public:
  explicit SimVisionReflectionAgent(double gamma_clip) : gamma_clip_(gamma_clip) {}
  Verdict verify(const Scene& original, const Scene& edited) override;

 private:
  double gamma_clip_;
};

// Scripted agents replay canned responses/verdicts in call order; exhausting
// the script raises ReplayError. Fixtures load from JSON.
class ScriptedDecisionAgent : public DecisionAgent {
 public:
  Response initial;
  std::vector<Response> on_text_feedback;
  std::vector<Response> on_vision_feedback;

  Response generate(const Scene& scene, const Query& query,
                    const std::optional<Feedback>& feedback) override;
  void reset() { text_calls_ = vision_calls_ = 0; initial_done_ = false; }

  static ScriptedDecisionAgent from_json(const nlohmann::json& j, const Vocab& vocab);

 private:
  std::size_t text_calls_ = 0;
  std::size_t vision_calls_ = 0;
  bool initial_done_ = false;
};

class ScriptedTextReflectionAgent : public TextReflectionAgent {
 public:
  std::vector<Verdict> verdicts;
  Verdict verify(const CaptionSet& captions, const Response& response) override;
  void reset() { calls_ = 0; }

 private:
  std::size_t calls_ = 0;
};

class ScriptedVisionReflectionAgent : public VisionReflectionAgent {
 public:
  std::vector<Verdict> verdicts;
  Verdict verify(const Scene& original, const Scene& edited) override;
  void reset() { calls_ = 0; }

 private:
  std::size_t calls_ = 0;
};

nlohmann::json response_to_json(const Response& response);
Response response_from_json(const nlohmann::json& j);

}  // namespace inex

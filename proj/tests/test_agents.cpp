#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "inex/agents.hpp"
#include "inex/errors.hpp"
#include "inex/eval.hpp"
#include "inex/rng.hpp"
#include "inex/scene.hpp"

using namespace inex;

namespace {

ModelWeights fixture_model(std::uint64_t seed = 42) {
  ModelConfig c;
  c.seed = seed;
  return build_model(c);
}

Scene dog_scene() {
  Scene s;
  s.objects.push_back({0, "dog", {{"color", "red"}}, {1, 1}});
  return s;
}

Response response_with(std::vector<Fact> facts, std::optional<bool> yes = {}) {
  Response r;
  r.facts = std::move(facts);
  r.yes = yes;
  return r;
}

// Exhaustive single-pass oracle: supported iff every recognized asserted
// fact appears in the caption set.
bool oracle_supported(const CaptionSet& captions, const Response& response) {
  const FactSet facts = captions.facts();
  for (const Fact& f : response.facts) {
    if (facts.count(f) == 0) return false;
  }
  return true;
}

Scene random_scene(Rng& rng, const Vocab& vocab) {
  Scene s;
  const std::size_t n = rng.next_below(4);
  for (std::size_t i = 0; i < n; ++i) {
    SceneObject o;
    o.id = static_cast<int>(i);
    o.category = vocab.categories[rng.next_below(vocab.categories.size())];
    if (rng.next_below(2) == 0) {
      o.attributes["color"] = vocab.colors[rng.next_below(vocab.colors.size())];
    }
    s.objects.push_back(o);
  }
  return s;
}

Response random_response(Rng& rng, const Vocab& vocab) {
  Response r;
  std::set<std::string> used;  // one subject per category: no conflicting colors
  const std::size_t n = rng.next_below(4);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string cat = vocab.categories[rng.next_below(vocab.categories.size())];
    if (!used.insert(cat).second) continue;
    r.facts.push_back({cat, "exists", "true"});
    if (rng.next_below(2) == 0) {
      r.facts.push_back({cat, "color", vocab.colors[rng.next_below(vocab.colors.size())]});
    }
  }
  return r;
}

}  // namespace

TEST_CASE("extract_facts parses category/attribute token streams") {
  const Vocab vocab = Vocab::standard();
  const int dog = vocab.category_token("dog");
  const int red = vocab.color_token("red");
  const int running = vocab.action_token("running");
  const int cat = vocab.category_token("cat");

  const auto facts = extract_facts({dog, red, running, cat, Vocab::kEos, cat}, vocab);
  REQUIRE(facts.size() == 4);
  CHECK(facts[0] == Fact{"dog", "exists", "true"});
  CHECK(facts[1] == Fact{"dog", "color", "red"});
  CHECK(facts[2] == Fact{"dog", "action", "running"});
  CHECK(facts[3] == Fact{"cat", "exists", "true"});

  // Attribute before any category has no subject and is dropped.
  CHECK(extract_facts({red, Vocab::kEos}, vocab).empty());
}

TEST_CASE("sim decision agent is deterministic") {
  const ModelWeights w = fixture_model();
  IntrospectionConfig cfg;
  const Query q{Query::Kind::Exists, "dog"};
  SimDecisionAgent a(w, cfg);
  SimDecisionAgent b(w, cfg);
  CHECK(a.generate(dog_scene(), q, std::nullopt) ==
        b.generate(dog_scene(), q, std::nullopt));
}

TEST_CASE("doctored logit bias creates the hallucination fixture") {
  ModelWeights w = fixture_model();
  const Vocab& vocab = w.config.vocab;
  w.out_bias[vocab.category_token("cat")] = 50.0;  // over-assert cat

  IntrospectionConfig cfg;
  SimDecisionAgent agent(w, cfg, 4, false);
  const Query q{Query::Kind::Exists, "cat"};
  const Response r = agent.generate(dog_scene(), q, std::nullopt);
  // A catless scene still yields a cat assertion.
  CHECK(std::any_of(r.facts.begin(), r.facts.end(), [](const Fact& f) {
    return f.subject == "cat" && f.slot == "exists";
  }));
  CHECK(r.yes == true);
}

TEST_CASE("conflict feedback bans facts from later assertions") {
  ModelWeights w = fixture_model();
  const Vocab& vocab = w.config.vocab;
  w.out_bias[vocab.category_token("cat")] = 50.0;

  IntrospectionConfig cfg;
  SimDecisionAgent agent(w, cfg, 4, false);
  const Query q{Query::Kind::Exists, "cat"};
  const Response before = agent.generate(dog_scene(), q, std::nullopt);
  REQUIRE_FALSE(before.facts.empty());

  Feedback fb{Feedback::Source::Text, {{{"cat", "exists", "true"}, "conflict"}}};
  const Response after = agent.generate(dog_scene(), q, fb);
  CHECK(std::none_of(after.facts.begin(), after.facts.end(), [](const Fact& f) {
    return f.subject == "cat" && f.slot == "exists";
  }));
  CHECK(after.yes == false);

  // Strictly fewer unsupported facts than before the feedback round.
  const FactSet grounded = scene_facts(dog_scene());
  auto unsupported = [&](const Response& r) {
    std::size_t n = 0;
    for (const Fact& f : r.facts) n += grounded.count(f) == 0 ? 1 : 0;
    return n;
  };
  CHECK(unsupported(after) < unsupported(before));
}

TEST_CASE("text reflection accepts caption-exact responses") {
  const Scene s = dog_scene();
  const CaptionSet captions = derive_captions(s);
  ReflectionConfig rc;
  SimTextReflectionAgent agent(rc);

  const Response exact = response_with(
      {{"dog", "exists", "true"}, {"dog", "color", "red"}});
  const Verdict v = agent.verify(captions, exact);
  CHECK(v.supported);
  CHECK(v.evidence.empty());

  const Response wrong = response_with({{"cat", "exists", "true"}});
  const Verdict bad = agent.verify(captions, wrong);
  CHECK_FALSE(bad.supported);
  REQUIRE_FALSE(bad.evidence.empty());
  CHECK(bad.evidence[0].fact == Fact{"cat", "exists", "true"});
  CHECK(bad.evidence[0].tag == "conflict");
}

TEST_CASE("text reflection ensemble agrees with the exhaustive checker") {
  Rng rng(111);
  const Vocab vocab = Vocab::standard();
  ReflectionConfig rc;
  rc.seed = 5;
  SimTextReflectionAgent agent(rc);
  for (int trial = 0; trial < 200; ++trial) {
    const Scene s = random_scene(rng, vocab);
    const Response r = random_response(rng, vocab);
    const CaptionSet captions = derive_captions(s);
    const Verdict v = agent.verify(captions, r);
    CHECK(v.supported == oracle_supported(captions, r));
    // Determinism across repeated verification.
    const Verdict again = agent.verify(captions, r);
    CHECK(again.supported == v.supported);
    CHECK(again.evidence == v.evidence);
  }
}

TEST_CASE("edit agent realizes asserted facts") {
  SimEditAgent agent;
  const Scene s = dog_scene();

  // Only true facts: fact-identical scene.
  const Scene same =
      agent.edit(response_with({{"dog", "exists", "true"}, {"dog", "color", "red"}}), s);
  CHECK(scene_facts(same) == scene_facts(s));

  // Nonexistent cat gets inserted.
  const Scene with_cat = agent.edit(response_with({{"cat", "exists", "true"}}), s);
  CHECK(with_cat.has_category("cat"));
  CHECK_FALSE(s.has_category("cat"));

  // Random responses: the edited scene satisfies every asserted fact.
  Rng rng(222);
  const Vocab vocab = Vocab::standard();
  for (int trial = 0; trial < 100; ++trial) {
    const Scene base = random_scene(rng, vocab);
    const Response r = random_response(rng, vocab);
    const Scene edited = agent.edit(r, base);
    const FactSet facts = scene_facts(edited);
    for (const Fact& f : r.facts) CHECK(facts.count(f) == 1);
  }

  CHECK_THROWS_AS(agent.edit(response_with({{"", "exists", "true"}}), s),
                  InvalidEditError);
}

TEST_CASE("vision reflection thresholds on scene similarity") {
  SimVisionReflectionAgent agent(0.9);
  const Scene s = dog_scene();
  CHECK(agent.verify(s, s).supported);

  Scene two = s;
  two.objects.push_back({1, "cat", {}, {2, 2}});
  // 2 facts vs 3 in the union: similarity 2/3 < 0.9.
  const Verdict v = agent.verify(s, two);
  CHECK_FALSE(v.supported);
  REQUIRE(v.evidence.size() == 1);
  CHECK(v.evidence[0].fact == Fact{"cat", "exists", "true"});
  CHECK(v.evidence[0].tag == "conflict");

  // Supported flips exactly at similarity == gamma: sim 0.5 vs gamma 0.5.
  Scene a, b;
  a.objects.push_back({0, "dog", {}, {0, 0}});
  b = a;
  b.objects.push_back({1, "cat", {}, {1, 1}});
  CHECK(SimVisionReflectionAgent(0.5).verify(a, b).supported);
  CHECK_FALSE(SimVisionReflectionAgent(0.5001).verify(a, b).supported);
}

TEST_CASE("vision reflection matches the threshold oracle on random pairs") {
  Rng rng(333);
  const Vocab vocab = Vocab::standard();
  SimVisionReflectionAgent agent(0.9);
  for (int trial = 0; trial < 100; ++trial) {
    const Scene a = random_scene(rng, vocab);
    const Scene b = random_scene(rng, vocab);
    CHECK(agent.verify(a, b).supported == (scene_similarity(a, b) >= 0.9));
  }
}

TEST_CASE("reflection config validation") {
  ReflectionConfig bad;
  bad.perspectives = 5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.perspectives = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ReflectionConfig zero;
  zero.ensemble_size = 0;
  CHECK_THROWS_AS(zero.validate(), std::invalid_argument);
}

TEST_CASE("scripted agents replay and exhaust") {
  ScriptedDecisionAgent agent;
  agent.initial = response_with({{"dog", "exists", "true"}});
  agent.on_text_feedback = {response_with({{"cat", "exists", "true"}})};

  const Query q{Query::Kind::Exists, "dog"};
  CHECK(agent.generate(dog_scene(), q, std::nullopt) == agent.initial);
  CHECK_THROWS_AS(agent.generate(dog_scene(), q, std::nullopt), ReplayError);

  Feedback fb{Feedback::Source::Text, {}};
  CHECK(agent.generate(dog_scene(), q, fb) == agent.on_text_feedback[0]);
  CHECK_THROWS_AS(agent.generate(dog_scene(), q, fb), ReplayError);

  Feedback fv{Feedback::Source::Vision, {}};
  CHECK_THROWS_AS(agent.generate(dog_scene(), q, fv), ReplayError);

  agent.reset();
  CHECK(agent.generate(dog_scene(), q, std::nullopt) == agent.initial);
}

TEST_CASE("scripted agent JSON fixture round trip") {
  const nlohmann::json j = {
      {"initial", response_to_json(response_with({{"dog", "exists", "true"}}, true))},
      {"text", {response_to_json(response_with({{"cat", "exists", "true"}}))}},
  };
  ScriptedDecisionAgent agent = ScriptedDecisionAgent::from_json(j, Vocab::standard());
  CHECK(agent.initial.facts.size() == 1);
  CHECK(agent.initial.yes == true);
  REQUIRE(agent.on_text_feedback.size() == 1);
  CHECK(agent.on_text_feedback[0].facts[0].subject == "cat");
  CHECK(agent.on_vision_feedback.empty());
}

TEST_CASE("response JSON round trip") {
  Response r;
  r.tokens = {9, 10, 1};
  r.facts = {{"dog", "color", "red"}};
  r.yes = false;
  const Response back = response_from_json(response_to_json(r));
  CHECK(back == r);
}

#pragma once

#include <array>
#include <compare>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace inex {

// A grounded fact triple: (subject category, slot, value).
struct Fact {
  std::string subject;
  std::string slot;
  std::string value;

  auto operator<=>(const Fact&) const = default;
  std::string str() const { return subject + "/" + slot + "/" + value; }
};

using FactSet = std::set<Fact>;

struct SceneObject {
  int id = 0;
  std::string category;
  std::map<std::string, std::string> attributes;  // slot -> value
  std::array<int, 2> pos{0, 0};

  bool operator==(const SceneObject&) const = default;
};

// Synthetic "image": a flat scene graph over a closed symbol vocabulary.
struct Scene {
  std::vector<SceneObject> objects;
  int grid = 16;

  bool operator==(const Scene&) const = default;
  const SceneObject* find(int id) const;
  bool has_category(const std::string& category) const;
};

struct Caption {
  int object_id = 0;
  Fact fact;
};

struct CaptionSet {
  std::vector<Caption> captions;
  FactSet facts() const;
};

struct EditOp {
  enum class Kind { Insert, Remove, SetAttribute };
  Kind kind = Kind::Insert;
  SceneObject object;     // Insert
  int object_id = 0;      // Remove / SetAttribute
  std::string slot;       // SetAttribute
  std::string value;      // SetAttribute
};

struct SceneEdit {
  std::vector<EditOp> ops;
};

// All facts entailed by the scene: per object an existence triple plus one
// triple per attribute. Duplicate categories collapse in fact space.
FactSet scene_facts(const Scene& scene);

// Sound and complete caption set, ordered by object id then slot.
CaptionSet derive_captions(const Scene& scene);

// Pure: returns a new scene, input untouched. Throws InvalidEditError on
// removal of an unknown id.
Scene apply_edit(const Scene& scene, const SceneEdit& edit);

// Jaccard similarity over the fact triples of both scenes. Two empty scenes
// compare as 1.
double scene_similarity(const Scene& a, const Scene& b);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);
nlohmann::json captions_to_json(const CaptionSet& captions);

}  // namespace inex

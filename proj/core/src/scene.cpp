#include "inex/scene.hpp"

#include <algorithm>

#include "inex/errors.hpp"

namespace inex {

const SceneObject* Scene::find(int id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

bool Scene::has_category(const std::string& category) const {
  return std::any_of(objects.begin(), objects.end(),
                     [&](const SceneObject& o) { return o.category == category; });
}

FactSet CaptionSet::facts() const {
  FactSet out;
  for (const auto& c : captions) out.insert(c.fact);
  return out;
}

FactSet scene_facts(const Scene& scene) {
  FactSet out;
  for (const auto& o : scene.objects) {
    out.insert({o.category, "exists", "true"});
    for (const auto& [slot, value] : o.attributes) {
      out.insert({o.category, slot, value});
    }
  }
  return out;
}

CaptionSet derive_captions(const Scene& scene) {
  std::vector<SceneObject> sorted = scene.objects;
  std::sort(sorted.begin(), sorted.end(),
            [](const SceneObject& a, const SceneObject& b) { return a.id < b.id; });
  CaptionSet out;
  for (const auto& o : sorted) {
    out.captions.push_back({o.id, {o.category, "exists", "true"}});
    // std::map keeps attribute slots sorted already.
    for (const auto& [slot, value] : o.attributes) {
      out.captions.push_back({o.id, {o.category, slot, value}});
    }
  }
  return out;
}

Scene apply_edit(const Scene& scene, const SceneEdit& edit) {
  Scene out = scene;
  for (const auto& op : edit.ops) {
    switch (op.kind) {
      case EditOp::Kind::Insert:
        out.objects.push_back(op.object);
        break;
      case EditOp::Kind::Remove: {
        auto it = std::find_if(out.objects.begin(), out.objects.end(),
                               [&](const SceneObject& o) { return o.id == op.object_id; });
        if (it == out.objects.end()) {
          throw InvalidEditError("apply_edit: remove of unknown object id " +
                                 std::to_string(op.object_id));
        }
        out.objects.erase(it);
        break;
      }
      case EditOp::Kind::SetAttribute: {
        auto it = std::find_if(out.objects.begin(), out.objects.end(),
                               [&](const SceneObject& o) { return o.id == op.object_id; });
        if (it == out.objects.end()) {
          throw InvalidEditError("apply_edit: set-attribute on unknown object id " +
                                 std::to_string(op.object_id));
        }
        it->attributes[op.slot] = op.value;
        break;
      }
    }
  }
  return out;
}

double scene_similarity(const Scene& a, const Scene& b) {
  const FactSet fa = scene_facts(a);
  const FactSet fb = scene_facts(b);
  if (fa.empty() && fb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& f : fa) {
    if (fb.count(f) != 0) ++inter;
  }
  const std::size_t uni = fa.size() + fb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : scene.objects) {
    nlohmann::json attrs = nlohmann::json::object();
    for (const auto& [slot, value] : o.attributes) attrs[slot] = value;
    objs.push_back({{"id", o.id},
                    {"category", o.category},
                    {"attributes", attrs},
                    {"pos", {o.pos[0], o.pos[1]}}});
  }
  return {{"objects", objs}, {"grid", scene.grid}};
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene scene;
  scene.grid = j.value("grid", 16);
  for (const auto& jo : j.at("objects")) {
    SceneObject o;
    o.id = jo.at("id").get<int>();
    o.category = jo.at("category").get<std::string>();
    for (const auto& [slot, value] : jo.at("attributes").items()) {
      o.attributes[slot] = value.get<std::string>();
    }
    o.pos = {jo.at("pos")[0].get<int>(), jo.at("pos")[1].get<int>()};
    scene.objects.push_back(o);
  }
  return scene;
}

nlohmann::json captions_to_json(const CaptionSet& captions) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : captions.captions) {
    out.push_back({{"object_id", c.object_id},
                   {"subject", c.fact.subject},
                   {"slot", c.fact.slot},
                   {"value", c.fact.value}});
  }
  return out;
}

}  // namespace inex

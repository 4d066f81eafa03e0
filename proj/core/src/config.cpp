#include "inex/config.hpp"

#include <cmath>
#include <fstream>

namespace inex {

namespace {

double get_number(const nlohmann::json& j, const std::string& path,
                  const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(path + key, "expected a number");
  return j[key].get<double>();
}

std::uint64_t get_uint(const nlohmann::json& j, const std::string& path,
                       const std::string& key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_unsigned()) {
    throw ConfigError(path + key, "expected a non-negative integer");
  }
  return j[key].get<std::uint64_t>();
}

std::string get_string(const nlohmann::json& j, const std::string& path,
                       const std::string& key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw ConfigError(path + key, "expected a string");
  return j[key].get<std::string>();
}

void require_object(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

template <typename Fn>
void check(const std::string& field, Fn fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  check("model", [&] { model.validate(); });
  // Surface the most common mistakes under their own field names.
  if (!(introspection.gamma_tver > 0.0)) {
    throw ConfigError("introspection.gamma_tver", "must be > 0");
  }
  if (!(introspection.alpha >= 0.0 && introspection.alpha <= 1.0)) {
    throw ConfigError("introspection.alpha", "must be in [0,1]");
  }
  if (introspection.top_k < 1) {
    throw ConfigError("introspection.top_k", "must be >= 1");
  }
  check("introspection", [&] { introspection.validate(); });
  if (reflection.perspectives < 1 || reflection.perspectives > 4) {
    throw ConfigError("reflection.perspectives", "must be in [1,4]");
  }
  check("reflection", [&] { reflection.validate(); });
  if (orchestrator.max_iterations < 1) {
    throw ConfigError("orchestrator.max_iterations", "must be >= 1");
  }
  if (!(orchestrator.gamma_clip >= 0.0 && orchestrator.gamma_clip <= 1.0)) {
    throw ConfigError("orchestrator.gamma_clip", "must be in [0,1]");
  }
  check("orchestrator", [&] { orchestrator.validate(); });
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  require_object(j, "");
  RunConfig cfg;

  if (j.contains("model")) {
    const auto& m = j["model"];
    require_object(m, "model");
    cfg.model.num_layers = get_uint(m, "model.", "num_layers", cfg.model.num_layers);
    cfg.model.num_heads = get_uint(m, "model.", "num_heads", cfg.model.num_heads);
    cfg.model.model_dim = get_uint(m, "model.", "model_dim", cfg.model.model_dim);
    cfg.model.vocab_size = get_uint(m, "model.", "vocab_size", cfg.model.vocab_size);
    cfg.model.max_visual_tokens =
        get_uint(m, "model.", "max_visual_tokens", cfg.model.max_visual_tokens);
    cfg.model.seed = get_uint(m, "model.", "seed", cfg.model.seed);
  }

  if (j.contains("introspection")) {
    const auto& s = j["introspection"];
    require_object(s, "introspection");
    auto& ic = cfg.introspection;
    ic.gamma_tver = get_number(s, "introspection.", "gamma_tver", ic.gamma_tver);
    ic.gamma_d = get_number(s, "introspection.", "gamma_d", ic.gamma_d);
    ic.alpha = get_number(s, "introspection.", "alpha", ic.alpha);
    ic.alpha1 = get_number(s, "introspection.", "alpha1", ic.alpha1);
    ic.alpha2 = get_number(s, "introspection.", "alpha2", ic.alpha2);
    ic.top_k = get_uint(s, "introspection.", "top_k", ic.top_k);
    const std::string mode =
        get_string(s, "introspection.", "partition_mode", "renormalize");
    if (mode == "renormalize") {
      ic.partition_mode = TverPartitionMode::Renormalize;
    } else if (mode == "resoftmax") {
      ic.partition_mode = TverPartitionMode::Resoftmax;
    } else {
      throw ConfigError("introspection.partition_mode",
                        "expected \"renormalize\" or \"resoftmax\"");
    }
  }

  if (j.contains("reflection")) {
    const auto& r = j["reflection"];
    require_object(r, "reflection");
    cfg.reflection.perspectives =
        get_uint(r, "reflection.", "perspectives", cfg.reflection.perspectives);
    cfg.reflection.ensemble_size =
        get_uint(r, "reflection.", "ensemble_size", cfg.reflection.ensemble_size);
    cfg.reflection.temperature =
        get_number(r, "reflection.", "temperature", cfg.reflection.temperature);
    cfg.reflection.seed = get_uint(r, "reflection.", "seed", cfg.reflection.seed);
  }

  if (j.contains("orchestrator")) {
    const auto& o = j["orchestrator"];
    require_object(o, "orchestrator");
    cfg.orchestrator.max_iterations =
        get_uint(o, "orchestrator.", "max_iterations", cfg.orchestrator.max_iterations);
    cfg.orchestrator.gamma_clip =
        get_number(o, "orchestrator.", "gamma_clip", cfg.orchestrator.gamma_clip);
  }

  cfg.corpus_path = get_string(j, "", "corpus_path", cfg.corpus_path);
  cfg.output_dir = get_string(j, "", "output_dir", cfg.output_dir);
  cfg.seed = get_uint(j, "", "seed", cfg.seed);

  cfg.validate();
  return cfg;
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  return {
      {"model",
       {{"num_layers", cfg.model.num_layers},
        {"num_heads", cfg.model.num_heads},
        {"model_dim", cfg.model.model_dim},
        {"vocab_size", cfg.model.vocab_size},
        {"max_visual_tokens", cfg.model.max_visual_tokens},
        {"seed", cfg.model.seed}}},
      {"introspection",
       {{"gamma_tver", cfg.introspection.gamma_tver},
        {"gamma_d", cfg.introspection.gamma_d},
        {"alpha", cfg.introspection.alpha},
        {"alpha1", cfg.introspection.alpha1},
        {"alpha2", cfg.introspection.alpha2},
        {"top_k", cfg.introspection.top_k},
        {"partition_mode",
         cfg.introspection.partition_mode == TverPartitionMode::Renormalize
             ? "renormalize"
             : "resoftmax"}}},
      {"reflection",
       {{"perspectives", cfg.reflection.perspectives},
        {"ensemble_size", cfg.reflection.ensemble_size},
        {"temperature", cfg.reflection.temperature},
        {"seed", cfg.reflection.seed}}},
      {"orchestrator",
       {{"max_iterations", cfg.orchestrator.max_iterations},
        {"gamma_clip", cfg.orchestrator.gamma_clip}}},
      {"corpus_path", cfg.corpus_path},
      {"output_dir", cfg.output_dir},
      {"seed", cfg.seed}};
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace inex

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "inex/agents.hpp"
#include "inex/introspection.hpp"
#include "inex/orchestrator.hpp"
#include "inex/toy_mllm.hpp"

namespace inex {

// Parse/validation failure with the dotted path of the offending field.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(const std::string& field_path, const std::string& msg)
      : std::runtime_error(field_path + ": " + msg), field(field_path) {}
};

// One file drives a whole experiment; defaults reproduce the reference
// hyper-parameters (gamma_tver 0.55, gamma_d 0.2, gamma_clip 0.9,
// alpha1 = alpha2 = 1, temperature 0.7, ensemble 3, perspectives 4,
// max_iterations 4, top_k 20).
struct RunConfig {
  ModelConfig model;
  IntrospectionConfig introspection;
  ReflectionConfig reflection;
  OrchestratorConfig orchestrator;
  std::string corpus_path;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError with field paths
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

RunConfig load_run_config(const std::string& path);

}  // namespace inex

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "inex/numerics.hpp"

namespace inex {

// Random sign-projection discretizer: symbol = bit pattern of the projected
// state against per-dimension median thresholds (boundary maps to 0).
struct DiscretizationScheme {
  Matrix projection;       // d x b, b <= 8
  Vec thresholds;          // per projected dimension

  std::size_t bits() const { return projection.cols; }
};

DiscretizationScheme make_scheme(std::size_t dim, std::size_t bits,
                                 std::uint64_t seed,
                                 const std::vector<Vec>& calibration_sample);

std::vector<int> discretize(const std::vector<Vec>& states,
                            const DiscretizationScheme& scheme);

// Plug-in (maximum-likelihood) mutual information in nats.
double plugin_mi(const std::vector<int>& xs, const std::vector<int>& ys);

double symbol_entropy(const std::vector<int>& xs);

// H(y) - I(y; h), clamped at the numerical floor.
double conditional_entropy(const std::vector<int>& ys, const std::vector<int>& hs);

struct MiReport {
  double mi_original = 0.0;        // I(H; z)
  double mi_enhanced = 0.0;        // I(H_hat; z)
  double cond_entropy_original = 0.0;
  double cond_entropy_enhanced = 0.0;
  double ib_original = 0.0;        // I(H; x) - beta * I(H; y)
  double ib_enhanced = 0.0;
  double beta = 1.0;
  bool low_sample_warning = false;
};

struct DiagnosticSamples {
  std::vector<int> x_symbols;   // discretized query embeddings
  std::vector<int> z_symbols;   // discretized visual-token means
  std::vector<int> y_symbols;   // emitted token ids
  std::vector<Vec> h_states;    // final-layer original hidden states
  std::vector<Vec> h_hat_states;  // enhanced hidden states
};

MiReport ib_diagnostic(const DiagnosticSamples& samples, double beta,
                       const DiscretizationScheme& scheme);

// Runs the seeded toy-model fixture for one configuration seed and collects
// diagnostic samples (one per decode step across a batch of synthetic items).
DiagnosticSamples collect_samples(std::uint64_t config_seed, std::size_t num_items,
                                  double alpha);

struct DirectionSummary {
  std::size_t configs = 0;
  std::size_t mi_direction_holds = 0;      // mi_enhanced >= mi_original - slack
  std::size_t cond_entropy_direction_holds = 0;
  std::size_t ib_direction_holds = 0;
  double slack = 0.02;
};

nlohmann::json mi_report_to_json(const MiReport& report);

}  // namespace inex

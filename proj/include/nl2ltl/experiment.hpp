#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <json.hpp>

#include "nl2ltl/gateway.hpp"
#include "nl2ltl/metrics.hpp"
#include "nl2ltl/response.hpp"
#include "nl2ltl/scenario.hpp"

namespace nl2ltl::experiment {

struct ExperimentConfig {
  std::vector<double> alphas = {0.05, 0.03, 0.01};
  std::size_t calibration_size = 200;
  std::size_t test_size = 200;
  int reps = 10;
  std::uint64_t seed = 7;
  bool auxiliary = true;
  response::EngineConfig engine;
  PromptTemplate prompt_template = PromptTemplate::default_template();
  int h_max = 64;
  bool parallel = true;
};

struct AlphaResult {
  double alpha = 0.0;
  metrics::MetricsSummary mean;
  std::vector<metrics::MetricsSummary> per_rep;
  std::vector<double> q_bar;  // per rep
  std::size_t saturated_reps = 0;
};

struct ExperimentResult {
  bool auxiliary = true;
  std::vector<AlphaResult> by_alpha;

  const AlphaResult& at(double alpha) const;
  nlohmann::json to_json() const;
};

/// Repeats: split the corpus into calibration and test scenarios, calibrate
/// against the simulated models, then translate every test scenario with a
/// benign user at each alpha. Draws are shared across alphas within a rep.
/// Throws InsufficientCorpus when the corpus is smaller than
/// calibration_size + test_size.
ExperimentResult run_coverage_experiment(const ExperimentConfig& config, const std::vector<Scenario>& corpus,
                                         std::shared_ptr<const gateway::SimulatedProfile> primary,
                                         std::shared_ptr<const gateway::SimulatedProfile> auxiliary);

}  // namespace nl2ltl::experiment

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "nl2ltl/gateway.hpp"
#include "nl2ltl/ltl.hpp"
#include "nl2ltl/scenario.hpp"

namespace nl2ltl::synthetic {

struct SyntheticOptions {
  std::size_t n_scenarios = 400;
  int min_tokens = 3;  // formula length with the end marker
  int max_tokens = 12;
  std::uint64_t seed = 2024;
  double failure_rate = 0.002;  // per step: the truth is missing from both models
  double invalid_rate = 0.3;    // chance that a step also emits rule-breaking strings
  double aux_jitter = 0.05;     // spread of the auxiliary truth probability around the primary one
};

struct SyntheticCorpus {
  std::vector<Scenario> scenarios;
  std::shared_ptr<gateway::SimulatedProfile> primary;
  std::shared_ptr<gateway::SimulatedProfile> auxiliary;
};

/// Random formula whose token list (end marker included) has exactly
/// `length` tokens. Throws InvalidArgument for lengths below 2.
ltl::Formula random_formula(std::mt19937_64& rng, int length);

/// Plain-English rendering used as the scenario's task text.
std::string describe_formula(const ltl::Formula& formula);

/// Probability the simulated model gives the correct response at one step:
/// mostly confident, sometimes hesitant, occasionally poor.
double draw_truth_probability(std::mt19937_64& rng);

/// Scenarios with ground truth plus primary and auxiliary profiles covering
/// every truth prefix. Wrong distractors use identifiers that differ from
/// the truth so they never merge with it, and the two models mostly
/// disagree on which distractors they produce.
SyntheticCorpus generate(const SyntheticOptions& options);

}  // namespace nl2ltl::synthetic

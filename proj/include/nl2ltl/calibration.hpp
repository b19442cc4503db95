#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nl2ltl/conformal.hpp"
#include "nl2ltl/gateway.hpp"
#include "nl2ltl/response.hpp"
#include "nl2ltl/scenario.hpp"

namespace nl2ltl::calibration {

enum class TruthSource { FromShared, UserTyped };

struct LabelResult {
  std::string response;
  Rational primary_frequency;
  std::optional<Rational> auxiliary_frequency;  // empty without an auxiliary model
  TruthSource source = TruthSource::FromShared;

  friend bool operator==(const LabelResult&, const LabelResult&) = default;
};

/// Responses generated by both models (by the primary alone when
/// `auxiliary` is null), in the primary distribution's order.
std::vector<std::string> shared_responses(const response::ResponseDistribution& primary,
                                          const response::ResponseDistribution* auxiliary);

/// Picks the correct candidate with the highest primary frequency among
/// the shared responses (ties: lexicographically smaller). When none is
/// shared, the first candidate is recorded as typed in with frequency 0.
LabelResult label_step(const response::ResponseDistribution& primary,
                       const response::ResponseDistribution* auxiliary,
                       const std::vector<std::string>& correct_candidates);

/// Result for a response typed in by a person: frequency 0 for every model.
LabelResult typed_label(std::string response, bool auxiliary_enabled);

struct StepRecord {
  std::vector<std::string> status;  // truth prefix shown in the prompt
  int k = 1;
  response::ResponseDistribution primary;
  std::optional<response::ResponseDistribution> auxiliary;
  LabelResult label;
};

struct CalibrationRecord {
  std::string scenario_id;
  std::string fingerprint;
  std::vector<StepRecord> per_step;
  Rational ncs;

  std::vector<conformal::StepFrequencies> truth_frequencies() const;
  /// Labeled responses in order, end marker included.
  std::vector<std::string> tokens() const;
  bool has_user_typed_step() const;

  nlohmann::json to_json() const;
  static CalibrationRecord from_json(const nlohmann::json& doc);
};

void save_records(const std::vector<CalibrationRecord>& records, const std::string& path);
std::vector<CalibrationRecord> load_records(const std::string& path);

/// Correct next responses given the truth prefix chosen so far: step-k
/// tokens of every correct formula that agrees with `prefix`.
std::vector<std::string> candidates_for_prefix(const Scenario& scenario, const std::vector<std::string>& prefix);

/// Decides the truth at each calibration step.
class Labeler {
 public:
  virtual ~Labeler() = default;
  virtual LabelResult label(const Scenario& scenario, const std::vector<std::string>& prefix, int k,
                            const response::ResponseDistribution& primary,
                            const response::ResponseDistribution* auxiliary) = 0;
};

/// Labels from the scenario's annotated formulas.
class CorpusLabeler final : public Labeler {
 public:
  LabelResult label(const Scenario& scenario, const std::vector<std::string>& prefix, int k,
                    const response::ResponseDistribution& primary,
                    const response::ResponseDistribution* auxiliary) override;
};

struct CalibrationSetup {
  gateway::ModelHandle primary;
  std::optional<gateway::ModelHandle> auxiliary;
  response::EngineConfig config;
  PromptTemplate prompt_template = PromptTemplate::default_template();
  response::SimilarityFn similarity = response::default_similarity();
  int h_max = 64;

  std::string fingerprint() const;
};

/// Walks one scenario with truth prefixes in every prompt.
CalibrationRecord label_scenario(const Scenario& scenario, const CalibrationSetup& setup, Labeler& labeler);

std::vector<CalibrationRecord> build_dataset(const std::vector<Scenario>& scenarios, const CalibrationSetup& setup,
                                             Labeler& labeler);

/// Throws EmptySequence on no records and MixedFingerprints when records
/// come from different configurations.
conformal::CalibrationModel build_calibration_model(const std::vector<CalibrationRecord>& records, double alpha);

}  // namespace nl2ltl::calibration

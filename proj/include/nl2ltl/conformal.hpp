#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nl2ltl/error.hpp"
#include "nl2ltl/rational.hpp"
#include "nl2ltl/response.hpp"

namespace nl2ltl::conformal {

/// Frequencies of the correct response at one step. `auxiliary` is empty
/// when the engine runs without an auxiliary model.
struct StepFrequencies {
  Rational primary;
  std::optional<Rational> auxiliary;
};

/// Nonconformity score of one sequence: 1 - min over steps and models of
/// the correct response's frequency. Throws EmptySequence on no steps.
Rational compute_ncs(const std::vector<StepFrequencies>& steps);

/// Rank used by split conformal calibration: ceil((D + 1)(1 - alpha)).
/// The product is snapped to the nearest integer when within 1e-9 so that
/// decimal alphas such as 0.01 do not pick up binary rounding.
std::size_t conformal_rank(std::size_t n_scores, double alpha);

template <typename T>
struct Quantile {
  T value{};
  std::size_t rank = 0;   // 1-based rank into the sorted scores
  bool saturated = false; // rank exceeded the number of scores; value is 1
};

/// k-th smallest score with k = conformal_rank(D, alpha), or 1 (saturated)
/// when k > D.
template <typename T>
Quantile<T> compute_quantile(std::vector<T> scores, double alpha) {
  if (scores.empty()) throw Error(Errc::EmptySequence, "no calibration scores");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::InvalidArgument, "alpha must lie in (0, 1)");
  const auto k = conformal_rank(scores.size(), alpha);
  if (k > scores.size()) return Quantile<T>{T(1), k, true};
  std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k - 1), scores.end());
  return Quantile<T>{scores[k - 1], k, false};
}

enum class SetSource { PrimaryOnly, Intersection };

struct SetMember {
  std::string response;
  Rational frequency;

  friend bool operator==(const SetMember&, const SetMember&) = default;
};

struct PredictionSet {
  std::vector<SetMember> members;  // descending frequency
  SetSource source = SetSource::PrimaryOnly;
  bool saturated = false;

  std::size_t size() const noexcept { return members.size(); }
  bool empty() const noexcept { return members.empty(); }
  bool contains(const std::string& response) const;
  std::vector<std::string> responses() const;
};

/// Entries whose frequency is at least 1 - q_bar (inclusive).
PredictionSet prediction_set(const response::ResponseDistribution& dist, const Rational& q_bar);

/// Members present in both sets, with the primary set's frequencies.
PredictionSet intersect_sets(const PredictionSet& primary, const PredictionSet& auxiliary);

/// Per-step set actually used at test time: the primary set when it is a
/// singleton, the intersection otherwise.
PredictionSet step_set(const PredictionSet& primary, const PredictionSet& auxiliary);

/// Cartesian-product membership: token k must be in set k for every k.
/// Throws LengthMismatch.
bool sequence_set_contains(const std::vector<PredictionSet>& per_step, const std::vector<std::string>& tokens);

/// Sequence confidence: min over steps and models of the frequency each
/// distribution gives to the corresponding token (0 when absent).
Rational sequence_confidence(const std::vector<response::ResponseDistribution>& primary,
                             const std::vector<response::ResponseDistribution>& auxiliary,
                             const std::vector<std::string>& tokens);

// ---------------------------------------------------------------------------

struct CalibrationModel {
  double alpha = 0.1;
  std::vector<Rational> scores;
  Rational q_bar;
  std::size_t rank = 0;
  bool saturated = false;
  std::string fingerprint;
  std::string created_at;
  std::vector<std::string> dataset_ids;

  /// Recomputes q_bar for another alpha over the same scores.
  CalibrationModel with_alpha(double new_alpha) const;

  nlohmann::json to_json() const;
  static CalibrationModel from_json(const nlohmann::json& doc);
  void save(const std::string& path) const;
  static CalibrationModel load(const std::string& path);
};

/// Builds a model from raw scores. Throws EmptySequence / InvalidArgument.
CalibrationModel make_calibration_model(std::vector<Rational> scores, double alpha, std::string fingerprint,
                                        std::vector<std::string> dataset_ids = {});

/// Hash binding a model to the conditions that generated its scores.
std::string config_fingerprint(const response::EngineConfig& config, const PromptTemplate& prompt_template,
                               bool auxiliary_enabled);

}  // namespace nl2ltl::conformal

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nl2ltl/translator.hpp"

namespace nl2ltl::metrics {

/// What one finished session contributes to the summary.
struct SessionOutcome {
  std::string scenario_id;
  std::string status;                         // Succeeded, Failed, Truncated, ...
  std::optional<std::string> failure_reason;  // "WrongFormula" for a succeeded but incorrect formula
  bool correct = false;
  std::size_t accepted_steps = 0;
  std::size_t user_choices = 0;

  static SessionOutcome from_session(const translator::TranslationSession& session);
  /// Recomputes the outcome from an exported session transcript.
  static SessionOutcome from_json(const nlohmann::json& session);
};

struct MetricsSummary {
  double alpha = 0.0;
  std::size_t n_scenarios = 0;
  double success_rate = 0.0;
  double help_rate = 0.0;   // user-chosen steps over accepted steps
  double h_f = 0.0;         // sessions with at least one user-chosen step
  std::size_t truncated = 0;
  std::map<std::string, std::size_t> failed_by_reason;

  std::size_t succeeded = 0;
  std::size_t accepted_steps = 0;
  std::size_t user_choices = 0;
  std::size_t sessions_with_help = 0;

  nlohmann::json to_json() const;
};

MetricsSummary summarize(const std::vector<SessionOutcome>& outcomes, double alpha);

/// Mean of per-run rates; counters are summed.
MetricsSummary mean_summary(const std::vector<MetricsSummary>& runs);

}  // namespace nl2ltl::metrics

#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nl2ltl/conformal.hpp"
#include "nl2ltl/gateway.hpp"
#include "nl2ltl/ltl.hpp"
#include "nl2ltl/response.hpp"
#include "nl2ltl/scenario.hpp"

namespace nl2ltl::translator {

inline constexpr int kDefaultMaxSteps = 64;

/// Assembles the step-k prompt from the template, the task and the partial
/// formula. Throws InvalidArgument unless k == partial.size() + 1.
PromptContext build_prompt(const Scenario& scenario, const std::vector<std::string>& partial, int k,
                           const PromptTemplate& prompt_template);

enum class ChoiceSource { PrimarySingleton, IntersectionSingleton, UserChoice };

enum class FailureReason {
  EmptyPrimarySet,
  EmptyIntersection,
  UserHalted,
  BackendError,      // non-retryable backend failure such as a profile miss
  MalformedFormula,  // "/" accepted before the tokens formed a formula
  EmptyDistribution, // argmax mode with no valid response
};

std::string choice_source_name(ChoiceSource s);
std::string failure_reason_name(FailureReason r);

struct HelpRequest {
  std::string session_id;
  int k = 1;
  std::vector<conformal::SetMember> candidates;  // descending primary frequency
  std::string task;
  std::vector<std::string> partial;
  bool allow_halt = true;

  nlohmann::json to_json() const;
};

struct StepAudit {
  int k = 1;
  response::ResponseDistribution primary;
  conformal::PredictionSet primary_set;
  std::optional<response::ResponseDistribution> auxiliary;
  std::optional<conformal::PredictionSet> auxiliary_set;
  std::optional<conformal::PredictionSet> intersection;
  std::optional<std::string> choice;
  std::optional<ChoiceSource> source;

  nlohmann::json to_json() const;
};

struct Running {};
struct AwaitingHelp {
  HelpRequest request;
};
struct Succeeded {
  ltl::Formula formula;
};
struct Failed {
  FailureReason reason;
  std::string detail;
};
struct Truncated {};

using SessionStatus = std::variant<Running, AwaitingHelp, Succeeded, Failed, Truncated>;

class TranslationSession {
 public:
  TranslationSession(std::string id, Scenario scenario);

  const std::string& id() const noexcept { return id_; }
  const Scenario& scenario() const noexcept { return scenario_; }
  int k() const noexcept { return k_; }
  /// Accepted responses so far, "/" included once accepted.
  const std::vector<std::string>& partial_tokens() const noexcept { return partial_; }
  const SessionStatus& status() const noexcept { return status_; }
  const std::vector<StepAudit>& transcript() const noexcept { return transcript_; }

  bool running() const noexcept { return std::holds_alternative<Running>(status_); }
  bool awaiting_help() const noexcept { return std::holds_alternative<AwaitingHelp>(status_); }
  bool terminal() const noexcept { return !running() && !awaiting_help(); }
  std::string status_name() const;

  std::size_t user_choices() const;
  std::size_t accepted_steps() const;
  /// Succeeded with one of the scenario's correct formulas.
  bool correct() const;

  nlohmann::json to_json() const;

 private:
  friend class Translator;

  void accept(const std::string& response, ChoiceSource source, int h_max);

  std::string id_;
  Scenario scenario_;
  int k_ = 1;
  std::vector<std::string> partial_;
  SessionStatus status_ = Running{};
  std::vector<StepAudit> transcript_;
  int h_max_ = kDefaultMaxSteps;
};

struct HelpDecision {
  enum class Kind { Select, Halt };
  Kind kind = Kind::Halt;
  std::string response;

  static HelpDecision select(std::string response) { return {Kind::Select, std::move(response)}; }
  static HelpDecision halt() { return {Kind::Halt, {}}; }
};

struct TranslatorOptions {
  response::EngineConfig config;
  PromptTemplate prompt_template = PromptTemplate::default_template();
  response::SimilarityFn similarity = response::default_similarity();
  int h_max = kDefaultMaxSteps;
};

/// Runs the per-step selection loop against a calibrated quantile.
class Translator {
 public:
  Translator(gateway::ModelHandle primary, std::optional<gateway::ModelHandle> auxiliary,
             conformal::CalibrationModel model, TranslatorOptions options);

  /// One step: primary set, then auxiliary set and intersection when the
  /// primary set is not a singleton. Throws ConfigFingerprintMismatch when
  /// the calibration model came from another configuration, and
  /// BackendUnavailable (the session stays Running).
  void advance_step(TranslationSession& session) const;

  /// Throws NotAwaitingHelp or UnknownCandidate.
  void apply_help_choice(TranslationSession& session, const HelpDecision& decision) const;

  std::string fingerprint() const;
  const conformal::CalibrationModel& model() const noexcept { return model_; }
  const TranslatorOptions& options() const noexcept { return options_; }
  bool has_auxiliary() const noexcept { return auxiliary_.has_value(); }

 private:
  gateway::ModelHandle primary_;
  std::optional<gateway::ModelHandle> auxiliary_;
  conformal::CalibrationModel model_;
  TranslatorOptions options_;
};

/// Source of human decisions for help requests.
class HelpResponder {
 public:
  virtual ~HelpResponder() = default;
  virtual HelpDecision decide(const TranslationSession& session, const HelpRequest& request) = 0;
};

/// Picks the correct candidate with the highest primary frequency, halts
/// when no candidate is correct.
class BenignUser final : public HelpResponder {
 public:
  HelpDecision decide(const TranslationSession& session, const HelpRequest& request) override;
};

/// Replays a fixed decision list; halts once it runs out.
class ScriptedUser final : public HelpResponder {
 public:
  explicit ScriptedUser(std::vector<HelpDecision> decisions) : decisions_(decisions.begin(), decisions.end()) {}

  /// Reads a JSON array of {"action":"select","response":..} / {"action":"halt"}
  /// objects, or bare strings where "halt" halts and anything else selects.
  static ScriptedUser load(const std::string& path);

  HelpDecision decide(const TranslationSession& session, const HelpRequest& request) override;
  std::size_t remaining() const noexcept { return decisions_.size(); }

 private:
  std::deque<HelpDecision> decisions_;
};

/// Advances until the session is terminal, consulting `responder` at every
/// help request.
void run_session(TranslationSession& session, const Translator& translator, HelpResponder& responder);

struct UaResult {
  std::vector<std::string> tokens;  // accepted responses, "/" included
  std::optional<ltl::Formula> formula;
  std::optional<FailureReason> failure;
  bool truncated = false;
};

/// Baseline without calibration: accept the most frequent primary response
/// at every step (ties: lexicographically smaller), never ask for help.
UaResult translate_ua(const Scenario& scenario, const gateway::ModelHandle& primary,
                      const TranslatorOptions& options);

}  // namespace nl2ltl::translator

#include "nl2ltl/metrics.hpp"

#include "nl2ltl/error.hpp"
#include "nl2ltl/scenario.hpp"

namespace nl2ltl::metrics {

using nlohmann::json;

SessionOutcome SessionOutcome::from_session(const translator::TranslationSession& session) {
  SessionOutcome o;
  o.scenario_id = session.scenario().id;
  o.status = session.status_name();
  o.accepted_steps = session.accepted_steps();
  o.user_choices = session.user_choices();
  o.correct = session.correct();
  if (const auto* f = std::get_if<translator::Failed>(&session.status())) {
    o.failure_reason = translator::failure_reason_name(f->reason);
  } else if (std::holds_alternative<translator::Succeeded>(session.status()) && !o.correct) {
    o.failure_reason = "WrongFormula";
  }
  return o;
}

SessionOutcome SessionOutcome::from_json(const json& session) {
  try {
    SessionOutcome o;
    const auto scenario = Scenario::from_json(session.at("scenario"));
    o.scenario_id = scenario.id;
    o.status = session.at("status").get<std::string>();
    for (const auto& step : session.at("transcript")) {
      if (step.value("choice", json(nullptr)).is_null()) continue;
      ++o.accepted_steps;
      if (step.at("choice_source") == "UserChoice") ++o.user_choices;
    }
    if (o.status == "Succeeded") {
      o.correct = scenario.is_correct(session.at("formula").get<std::vector<std::string>>());
      if (!o.correct) o.failure_reason = "WrongFormula";
    } else if (o.status == "Failed") {
      o.failure_reason = session.at("failure_reason").get<std::string>();
    }
    return o;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("session transcript: ") + e.what());
  }
}

json MetricsSummary::to_json() const {
  return {{"alpha", alpha},
          {"n_scenarios", n_scenarios},
          {"success_rate", success_rate},
          {"help_rate", help_rate},
          {"H_f", h_f},
          {"truncated", truncated},
          {"failed_by_reason", failed_by_reason},
          {"succeeded", succeeded},
          {"accepted_steps", accepted_steps},
          {"user_choices", user_choices},
          {"sessions_with_help", sessions_with_help}};
}

MetricsSummary summarize(const std::vector<SessionOutcome>& outcomes, double alpha) {
  MetricsSummary s;
  s.alpha = alpha;
  s.n_scenarios = outcomes.size();
  for (const auto& o : outcomes) {
    if (o.correct) ++s.succeeded;
    if (o.status == "Truncated") ++s.truncated;
    if (o.failure_reason) ++s.failed_by_reason[*o.failure_reason];
    s.accepted_steps += o.accepted_steps;
    s.user_choices += o.user_choices;
    if (o.user_choices > 0) ++s.sessions_with_help;
  }
  if (s.n_scenarios > 0) {
    s.success_rate = static_cast<double>(s.succeeded) / static_cast<double>(s.n_scenarios);
    s.h_f = static_cast<double>(s.sessions_with_help) / static_cast<double>(s.n_scenarios);
  }
  if (s.accepted_steps > 0) s.help_rate = static_cast<double>(s.user_choices) / static_cast<double>(s.accepted_steps);
  return s;
}

MetricsSummary mean_summary(const std::vector<MetricsSummary>& runs) {
  MetricsSummary m;
  if (runs.empty()) return m;
  const auto n = static_cast<double>(runs.size());
  m.alpha = runs.front().alpha;
  for (const auto& r : runs) {
    m.n_scenarios += r.n_scenarios;
    m.success_rate += r.success_rate / n;
    m.help_rate += r.help_rate / n;
    m.h_f += r.h_f / n;
    m.truncated += r.truncated;
    for (const auto& [reason, count] : r.failed_by_reason) m.failed_by_reason[reason] += count;
    m.succeeded += r.succeeded;
    m.accepted_steps += r.accepted_steps;
    m.user_choices += r.user_choices;
    m.sessions_with_help += r.sessions_with_help;
  }
  return m;
}

}  // namespace nl2ltl::metrics

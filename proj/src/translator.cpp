#include "nl2ltl/translator.hpp"

#include <fstream>

#include "nl2ltl/calibration.hpp"
#include "nl2ltl/error.hpp"

namespace nl2ltl::translator {

using nlohmann::json;

namespace {

json distribution_json(const response::ResponseDistribution& d) {
  json entries = json::array();
  for (const auto& e : d.entries) {
    entries.push_back({{"response", e.response}, {"count", e.count}, {"frequency", e.frequency.str()}});
  }
  return {{"entries", entries}, {"m_k", d.m_k}, {"raw", d.raw}};
}

json set_json(const conformal::PredictionSet& s) {
  json members = json::array();
  for (const auto& m : s.members) members.push_back({{"response", m.response}, {"frequency", m.frequency.str()}});
  return {{"members", members},
          {"source", s.source == conformal::SetSource::PrimaryOnly ? "PrimaryOnly" : "Intersection"},
          {"saturated", s.saturated}};
}

}  // namespace

PromptContext build_prompt(const Scenario& scenario, const std::vector<std::string>& partial, int k,
                           const PromptTemplate& prompt_template) {
  if (k != static_cast<int>(partial.size()) + 1) {
    throw Error(Errc::InvalidArgument, "step " + std::to_string(k) + " with " + std::to_string(partial.size()) +
                                           " accepted responses");
  }
  PromptContext p;
  p.rules = prompt_template.rules;
  p.shots = prompt_template.shots;
  p.task = scenario.nl_task;
  p.status = partial;
  p.k = k;
  return p;
}

std::string choice_source_name(ChoiceSource s) {
  switch (s) {
    case ChoiceSource::PrimarySingleton: return "PrimarySingleton";
    case ChoiceSource::IntersectionSingleton: return "IntersectionSingleton";
    case ChoiceSource::UserChoice: return "UserChoice";
  }
  return "";
}

std::string failure_reason_name(FailureReason r) {
  switch (r) {
    case FailureReason::EmptyPrimarySet: return "EmptyPrimarySet";
    case FailureReason::EmptyIntersection: return "EmptyIntersection";
    case FailureReason::UserHalted: return "UserHalted";
    case FailureReason::BackendError: return "BackendError";
    case FailureReason::MalformedFormula: return "MalformedFormula";
    case FailureReason::EmptyDistribution: return "EmptyDistribution";
  }
  return "";
}

json HelpRequest::to_json() const {
  json c = json::array();
  for (const auto& m : candidates) {
    c.push_back({{"response", m.response}, {"frequency", m.frequency.to_double()}, {"frequency_exact", m.frequency.str()}});
  }
  return {{"session_id", session_id}, {"k", k}, {"candidates", c},
          {"task", task}, {"partial", partial}, {"allow_halt", allow_halt}};
}

json StepAudit::to_json() const {
  json out = {{"k", k}, {"primary", distribution_json(primary)}, {"primary_set", set_json(primary_set)}};
  if (auxiliary) out["auxiliary"] = distribution_json(*auxiliary);
  if (auxiliary_set) out["auxiliary_set"] = set_json(*auxiliary_set);
  if (intersection) out["intersection"] = set_json(*intersection);
  out["choice"] = choice ? json(*choice) : json(nullptr);
  out["choice_source"] = source ? json(choice_source_name(*source)) : json(nullptr);
  return out;
}

TranslationSession::TranslationSession(std::string id, Scenario scenario)
    : id_(std::move(id)), scenario_(std::move(scenario)) {}

std::string TranslationSession::status_name() const {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Running>) return "Running";
        if constexpr (std::is_same_v<T, AwaitingHelp>) return "AwaitingHelp";
        if constexpr (std::is_same_v<T, Succeeded>) return "Succeeded";
        if constexpr (std::is_same_v<T, Failed>) return "Failed";
        if constexpr (std::is_same_v<T, Truncated>) return "Truncated";
      },
      status_);
}

std::size_t TranslationSession::user_choices() const {
  std::size_t n = 0;
  for (const auto& step : transcript_) n += step.source == ChoiceSource::UserChoice;
  return n;
}

std::size_t TranslationSession::accepted_steps() const {
  std::size_t n = 0;
  for (const auto& step : transcript_) n += step.choice.has_value();
  return n;
}

bool TranslationSession::correct() const {
  return std::holds_alternative<Succeeded>(status_) && scenario_.is_correct(partial_);
}

json TranslationSession::to_json() const {
  json steps = json::array();
  for (const auto& s : transcript_) steps.push_back(s.to_json());
  json out = {{"id", id_},
              {"scenario", scenario_.to_json()},
              {"k", k_},
              {"partial_tokens", partial_},
              {"status", status_name()},
              {"transcript", steps}};
  if (const auto* f = std::get_if<Failed>(&status_)) {
    out["failure_reason"] = failure_reason_name(f->reason);
    out["failure_detail"] = f->detail;
  }
  if (const auto* s = std::get_if<Succeeded>(&status_)) out["formula"] = s->formula.token_texts();
  if (const auto* h = std::get_if<AwaitingHelp>(&status_)) out["help_request"] = h->request.to_json();
  return out;
}

void TranslationSession::accept(const std::string& response, ChoiceSource source, int h_max) {
  auto& step = transcript_.back();
  step.choice = response;
  step.source = source;
  partial_.push_back(response);
  ++k_;
  if (response == ltl::kEndMarker) {
    try {
      status_ = Succeeded{ltl::parse_tokens(partial_)};
    } catch (const Error& e) {
      status_ = Failed{FailureReason::MalformedFormula, e.what()};
    }
    return;
  }
  if (k_ > h_max) {
    status_ = Truncated{};
    return;
  }
  status_ = Running{};
}

Translator::Translator(gateway::ModelHandle primary, std::optional<gateway::ModelHandle> auxiliary,
                       conformal::CalibrationModel model, TranslatorOptions options)
    : primary_(std::move(primary)),
      auxiliary_(std::move(auxiliary)),
      model_(std::move(model)),
      options_(std::move(options)) {
  options_.config.validate();
}

std::string Translator::fingerprint() const {
  return conformal::config_fingerprint(options_.config, options_.prompt_template, auxiliary_.has_value());
}

void Translator::advance_step(TranslationSession& session) const {
  if (!session.running()) throw Error(Errc::InvalidArgument, "session " + session.id() + " is " + session.status_name());
  if (model_.fingerprint != fingerprint()) {
    throw Error(Errc::ConfigFingerprintMismatch,
                "calibration model " + model_.fingerprint + " vs runtime configuration " + fingerprint());
  }
  session.h_max_ = options_.h_max;

  const auto prompt = build_prompt(session.scenario(), session.partial_, session.k_, options_.prompt_template);
  const auto& skills = session.scenario().skills;

  StepAudit step;
  step.k = session.k_;
  try {
    step.primary = response::get_responses(primary_, prompt, options_.config, skills, options_.similarity);
    step.primary_set = conformal::prediction_set(step.primary, model_.q_bar);

    if (step.primary_set.size() > 1 && auxiliary_) {
      step.auxiliary = response::get_responses(*auxiliary_, prompt, options_.config, skills, options_.similarity);
      step.auxiliary_set = conformal::prediction_set(*step.auxiliary, model_.q_bar);
      step.intersection = conformal::intersect_sets(step.primary_set, *step.auxiliary_set);
    }
  } catch (const Error& e) {
    if (e.code() == Errc::BackendUnavailable) throw;
    session.transcript_.push_back(std::move(step));
    session.status_ = Failed{FailureReason::BackendError, e.what()};
    return;
  }

  session.transcript_.push_back(step);
  const auto& recorded = session.transcript_.back();

  if (recorded.primary_set.empty()) {
    session.status_ = Failed{FailureReason::EmptyPrimarySet, "no response reached the threshold"};
    return;
  }
  if (recorded.primary_set.size() == 1) {
    session.accept(recorded.primary_set.members.front().response, ChoiceSource::PrimarySingleton, options_.h_max);
    return;
  }

  const auto& candidates = recorded.intersection ? *recorded.intersection : recorded.primary_set;
  if (candidates.empty()) {
    session.status_ = Failed{FailureReason::EmptyIntersection, "primary and auxiliary sets share no response"};
    return;
  }
  if (candidates.size() == 1) {
    session.accept(candidates.members.front().response, ChoiceSource::IntersectionSingleton, options_.h_max);
    return;
  }
  HelpRequest request;
  request.session_id = session.id();
  request.k = session.k_;
  request.candidates = candidates.members;
  request.task = session.scenario().nl_task;
  request.partial = session.partial_;
  session.status_ = AwaitingHelp{std::move(request)};
}

void Translator::apply_help_choice(TranslationSession& session, const HelpDecision& decision) const {
  const auto* waiting = std::get_if<AwaitingHelp>(&session.status_);
  if (!waiting) throw Error(Errc::NotAwaitingHelp, "session " + session.id() + " is " + session.status_name());
  if (decision.kind == HelpDecision::Kind::Halt) {
    session.status_ = Failed{FailureReason::UserHalted, "operator halted at step " + std::to_string(session.k_)};
    return;
  }
  const auto& candidates = waiting->request.candidates;
  const bool known = std::any_of(candidates.begin(), candidates.end(),
                                 [&](const conformal::SetMember& m) { return m.response == decision.response; });
  if (!known) throw Error(Errc::UnknownCandidate, "'" + decision.response + "' is not a candidate");
  const auto response = decision.response;
  session.accept(response, ChoiceSource::UserChoice, options_.h_max);
}

HelpDecision BenignUser::decide(const TranslationSession& session, const HelpRequest& request) {
  const auto correct = calibration::candidates_for_prefix(session.scenario(), session.partial_tokens());
  // Candidates arrive sorted by descending primary frequency.
  for (const auto& c : request.candidates) {
    if (std::find(correct.begin(), correct.end(), c.response) != correct.end()) return HelpDecision::select(c.response);
  }
  return HelpDecision::halt();
}

ScriptedUser ScriptedUser::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open decision file " + path);
  std::vector<HelpDecision> decisions;
  try {
    for (const auto& d : json::parse(in)) {
      if (d.is_string()) {
        const auto text = d.get<std::string>();
        decisions.push_back(text == "halt" ? HelpDecision::halt() : HelpDecision::select(text));
        continue;
      }
      const auto action = d.at("action").get<std::string>();
      if (action == "halt") {
        decisions.push_back(HelpDecision::halt());
      } else if (action == "select") {
        decisions.push_back(HelpDecision::select(d.at("response").get<std::string>()));
      } else {
        throw Error(Errc::InvalidArgument, "unknown decision action '" + action + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, "decision file " + path + ": " + e.what());
  }
  return ScriptedUser(std::move(decisions));
}

HelpDecision ScriptedUser::decide(const TranslationSession&, const HelpRequest&) {
  if (decisions_.empty()) return HelpDecision::halt();
  auto d = decisions_.front();
  decisions_.pop_front();
  return d;
}

void run_session(TranslationSession& session, const Translator& translator, HelpResponder& responder) {
  while (!session.terminal()) {
    if (const auto* waiting = std::get_if<AwaitingHelp>(&session.status())) {
      const auto request = waiting->request;
      translator.apply_help_choice(session, responder.decide(session, request));
    } else {
      translator.advance_step(session);
    }
  }
}

UaResult translate_ua(const Scenario& scenario, const gateway::ModelHandle& primary,
                      const TranslatorOptions& options) {
  options.config.validate();
  UaResult result;
  for (int k = 1;; ++k) {
    if (k > options.h_max) {
      result.truncated = true;
      return result;
    }
    const auto prompt = build_prompt(scenario, result.tokens, k, options.prompt_template);
    response::ResponseDistribution dist;
    try {
      dist = response::get_responses(primary, prompt, options.config, scenario.skills, options.similarity);
    } catch (const Error& e) {
      if (e.code() == Errc::BackendUnavailable) throw;
      result.failure = FailureReason::BackendError;
      return result;
    }
    if (dist.empty()) {
      result.failure = FailureReason::EmptyDistribution;
      return result;
    }
    // Entries are sorted by count, then lexicographically: front is the argmax.
    result.tokens.push_back(dist.entries.front().response);
    if (result.tokens.back() == ltl::kEndMarker) {
      try {
        result.formula = ltl::parse_tokens(result.tokens);
      } catch (const Error&) {
        result.failure = FailureReason::MalformedFormula;
      }
      return result;
    }
  }
}

}  // namespace nl2ltl::translator

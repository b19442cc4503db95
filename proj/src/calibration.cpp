#include "nl2ltl/calibration.hpp"

#include <fstream>

#include "nl2ltl/error.hpp"
#include "nl2ltl/ltl.hpp"
#include "nl2ltl/translator.hpp"

namespace nl2ltl::calibration {

using nlohmann::json;

namespace {

json dist_to_json(const response::ResponseDistribution& d) {
  json entries = json::array();
  for (const auto& e : d.entries) entries.push_back({e.response, e.count});
  return {{"entries", entries}, {"m_k", d.m_k}, {"raw", d.raw}};
}

response::ResponseDistribution dist_from_json(const json& doc) {
  response::ResponseDistribution d;
  d.m_k = doc.at("m_k").get<int>();
  d.raw = doc.value("raw", std::vector<std::string>{});
  for (const auto& e : doc.at("entries")) {
    const auto count = e.at(1).get<int>();
    d.entries.push_back({e.at(0).get<std::string>(), count, Rational(count, d.m_k)});
  }
  return d;
}

}  // namespace

std::vector<std::string> shared_responses(const response::ResponseDistribution& primary,
                                          const response::ResponseDistribution* auxiliary) {
  std::vector<std::string> out;
  for (const auto& e : primary.entries) {
    if (!auxiliary || auxiliary->find(e.response)) out.push_back(e.response);
  }
  return out;
}

LabelResult typed_label(std::string response, bool auxiliary_enabled) {
  LabelResult r;
  r.response = std::move(response);
  r.primary_frequency = Rational(0);
  if (auxiliary_enabled) r.auxiliary_frequency = Rational(0);
  r.source = TruthSource::UserTyped;
  return r;
}

LabelResult label_step(const response::ResponseDistribution& primary,
                       const response::ResponseDistribution* auxiliary,
                       const std::vector<std::string>& correct_candidates) {
  if (correct_candidates.empty()) throw Error(Errc::InvalidArgument, "label_step needs at least one correct candidate");
  const auto shared = shared_responses(primary, auxiliary);

  const response::ResponseEntry* best = nullptr;
  for (const auto& candidate : correct_candidates) {
    if (std::find(shared.begin(), shared.end(), candidate) == shared.end()) continue;
    const auto* entry = primary.find(candidate);
    if (!best || entry->frequency > best->frequency ||
        (entry->frequency == best->frequency && entry->response < best->response)) {
      best = entry;
    }
  }
  if (!best) return typed_label(correct_candidates.front(), auxiliary != nullptr);

  LabelResult r;
  r.response = best->response;
  r.primary_frequency = best->frequency;
  if (auxiliary) r.auxiliary_frequency = auxiliary->frequency_of(best->response);
  r.source = TruthSource::FromShared;
  return r;
}

std::vector<conformal::StepFrequencies> CalibrationRecord::truth_frequencies() const {
  std::vector<conformal::StepFrequencies> out;
  for (const auto& s : per_step) out.push_back({s.label.primary_frequency, s.label.auxiliary_frequency});
  return out;
}

std::vector<std::string> CalibrationRecord::tokens() const {
  std::vector<std::string> out;
  for (const auto& s : per_step) out.push_back(s.label.response);
  return out;
}

bool CalibrationRecord::has_user_typed_step() const {
  return std::any_of(per_step.begin(), per_step.end(),
                     [](const StepRecord& s) { return s.label.source == TruthSource::UserTyped; });
}

json CalibrationRecord::to_json() const {
  json steps = json::array();
  for (const auto& s : per_step) {
    json step = {{"k", s.k},
                 {"status", s.status},
                 {"primary", dist_to_json(s.primary)},
                 {"truth", s.label.response},
                 {"truth_source", s.label.source == TruthSource::FromShared ? "FromShared" : "UserTyped"},
                 {"f_primary", s.label.primary_frequency.str()}};
    if (s.auxiliary) step["auxiliary"] = dist_to_json(*s.auxiliary);
    if (s.label.auxiliary_frequency) step["f_auxiliary"] = s.label.auxiliary_frequency->str();
    steps.push_back(std::move(step));
  }
  return {{"scenario_id", scenario_id},
          {"fingerprint", fingerprint},
          {"ncs", ncs.str()},
          {"per_step", steps}};
}

CalibrationRecord CalibrationRecord::from_json(const json& doc) {
  try {
    CalibrationRecord r;
    r.scenario_id = doc.at("scenario_id").get<std::string>();
    r.fingerprint = doc.at("fingerprint").get<std::string>();
    r.ncs = Rational::parse(doc.at("ncs").get<std::string>());
    for (const auto& s : doc.at("per_step")) {
      StepRecord step;
      step.k = s.at("k").get<int>();
      step.status = s.at("status").get<std::vector<std::string>>();
      step.primary = dist_from_json(s.at("primary"));
      if (s.contains("auxiliary")) step.auxiliary = dist_from_json(s["auxiliary"]);
      step.label.response = s.at("truth").get<std::string>();
      step.label.source = s.at("truth_source").get<std::string>() == "UserTyped" ? TruthSource::UserTyped
                                                                                 : TruthSource::FromShared;
      step.label.primary_frequency = Rational::parse(s.at("f_primary").get<std::string>());
      if (s.contains("f_auxiliary")) step.label.auxiliary_frequency = Rational::parse(s["f_auxiliary"].get<std::string>());
      r.per_step.push_back(std::move(step));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("calibration record: ") + e.what());
  }
}

void save_records(const std::vector<CalibrationRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write calibration records " + path);
  for (const auto& r : records) out << r.to_json().dump() << "\n";
}

std::vector<CalibrationRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open calibration records " + path);
  std::vector<CalibrationRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(CalibrationRecord::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidArgument, path + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> candidates_for_prefix(const Scenario& scenario, const std::vector<std::string>& prefix) {
  std::vector<std::string> out;
  for (const auto& seq : scenario.correct_sequences()) {
    if (seq.size() <= prefix.size()) continue;
    if (!std::equal(prefix.begin(), prefix.end(), seq.begin())) continue;
    const auto& next = seq[prefix.size()];
    if (std::find(out.begin(), out.end(), next) == out.end()) out.push_back(next);
  }
  return out;
}

LabelResult CorpusLabeler::label(const Scenario& scenario, const std::vector<std::string>& prefix, int,
                                 const response::ResponseDistribution& primary,
                                 const response::ResponseDistribution* auxiliary) {
  const auto candidates = candidates_for_prefix(scenario, prefix);
  if (candidates.empty()) {
    throw Error(Errc::InvalidArgument, "scenario " + scenario.id + " has no annotated formula continuing [" +
                                           ltl::join_tokens(prefix) + "]");
  }
  return label_step(primary, auxiliary, candidates);
}

std::string CalibrationSetup::fingerprint() const {
  return conformal::config_fingerprint(config, prompt_template, auxiliary.has_value());
}

CalibrationRecord label_scenario(const Scenario& scenario, const CalibrationSetup& setup, Labeler& labeler) {
  setup.config.validate();
  CalibrationRecord record;
  record.scenario_id = scenario.id;
  record.fingerprint = setup.fingerprint();

  std::vector<std::string> prefix;
  for (int k = 1; k <= setup.h_max + 1; ++k) {
    const auto prompt = translator::build_prompt(scenario, prefix, k, setup.prompt_template);
    StepRecord step;
    step.status = prefix;
    step.k = k;
    step.primary = response::get_responses(setup.primary, prompt, setup.config, scenario.skills, setup.similarity);
    if (setup.auxiliary) {
      step.auxiliary =
          response::get_responses(*setup.auxiliary, prompt, setup.config, scenario.skills, setup.similarity);
    }
    step.label = labeler.label(scenario, prefix, k, step.primary, step.auxiliary ? &*step.auxiliary : nullptr);
    prefix.push_back(step.label.response);
    record.per_step.push_back(std::move(step));
    if (prefix.back() == ltl::kEndMarker) {
      record.ncs = conformal::compute_ncs(record.truth_frequencies());
      return record;
    }
  }
  throw Error(Errc::InvalidArgument, "labeling of " + scenario.id + " did not reach the end marker within " +
                                         std::to_string(setup.h_max) + " steps");
}

std::vector<CalibrationRecord> build_dataset(const std::vector<Scenario>& scenarios, const CalibrationSetup& setup,
                                             Labeler& labeler) {
  std::vector<CalibrationRecord> out;
  out.reserve(scenarios.size());
  for (const auto& s : scenarios) out.push_back(label_scenario(s, setup, labeler));
  return out;
}

conformal::CalibrationModel build_calibration_model(const std::vector<CalibrationRecord>& records, double alpha) {
  if (records.empty()) throw Error(Errc::EmptySequence, "no calibration records");
  std::vector<Rational> scores;
  std::vector<std::string> ids;
  for (const auto& r : records) {
    if (r.fingerprint != records.front().fingerprint) {
      throw Error(Errc::MixedFingerprints, r.scenario_id + " has " + r.fingerprint + ", expected " +
                                               records.front().fingerprint);
    }
    scores.push_back(r.ncs);
    ids.push_back(r.scenario_id);
  }
  return conformal::make_calibration_model(std::move(scores), alpha, records.front().fingerprint, std::move(ids));
}

}  // namespace nl2ltl::calibration

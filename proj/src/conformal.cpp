#include "nl2ltl/conformal.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace nl2ltl::conformal {

using nlohmann::json;

Rational compute_ncs(const std::vector<StepFrequencies>& steps) {
  if (steps.empty()) throw Error(Errc::EmptySequence, "nonconformity score needs at least one step");
  Rational lowest(1);
  for (const auto& s : steps) {
    lowest = std::min(lowest, s.primary);
    if (s.auxiliary) lowest = std::min(lowest, *s.auxiliary);
  }
  return Rational(1) - lowest;
}

std::size_t conformal_rank(std::size_t n_scores, double alpha) {
  const double product = static_cast<double>(n_scores + 1) * (1.0 - alpha);
  const double nearest = std::round(product);
  const double k = std::fabs(product - nearest) < 1e-9 ? nearest : std::ceil(product);
  return static_cast<std::size_t>(std::max(1.0, k));
}

bool PredictionSet::contains(const std::string& response) const {
  return std::any_of(members.begin(), members.end(), [&](const SetMember& m) { return m.response == response; });
}

std::vector<std::string> PredictionSet::responses() const {
  std::vector<std::string> out;
  for (const auto& m : members) out.push_back(m.response);
  return out;
}

PredictionSet prediction_set(const response::ResponseDistribution& dist, const Rational& q_bar) {
  PredictionSet set;
  set.saturated = q_bar >= Rational(1);
  const auto threshold = Rational(1) - q_bar;
  for (const auto& e : dist.entries) {
    if (e.frequency >= threshold) set.members.push_back({e.response, e.frequency});
  }
  return set;
}

PredictionSet intersect_sets(const PredictionSet& primary, const PredictionSet& auxiliary) {
  PredictionSet out;
  out.source = SetSource::Intersection;
  out.saturated = primary.saturated && auxiliary.saturated;
  for (const auto& m : primary.members) {
    if (auxiliary.contains(m.response)) out.members.push_back(m);
  }
  return out;
}

PredictionSet step_set(const PredictionSet& primary, const PredictionSet& auxiliary) {
  return primary.size() == 1 ? primary : intersect_sets(primary, auxiliary);
}

bool sequence_set_contains(const std::vector<PredictionSet>& per_step, const std::vector<std::string>& tokens) {
  if (per_step.size() != tokens.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(per_step.size()) + " sets for " +
                                          std::to_string(tokens.size()) + " tokens");
  }
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (!per_step[k].contains(tokens[k])) return false;
  }
  return true;
}

Rational sequence_confidence(const std::vector<response::ResponseDistribution>& primary,
                             const std::vector<response::ResponseDistribution>& auxiliary,
                             const std::vector<std::string>& tokens) {
  if (primary.size() != tokens.size() || (!auxiliary.empty() && auxiliary.size() != tokens.size())) {
    throw Error(Errc::LengthMismatch, "distributions and tokens differ in length");
  }
  std::vector<StepFrequencies> steps;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    StepFrequencies s{primary[k].frequency_of(tokens[k]), std::nullopt};
    if (!auxiliary.empty()) s.auxiliary = auxiliary[k].frequency_of(tokens[k]);
    steps.push_back(s);
  }
  return Rational(1) - compute_ncs(steps);
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

CalibrationModel make_calibration_model(std::vector<Rational> scores, double alpha, std::string fingerprint,
                                        std::vector<std::string> dataset_ids) {
  for (const auto& s : scores) {
    if (s < Rational(0) || s > Rational(1)) throw Error(Errc::InvalidArgument, "score outside [0, 1]: " + s.str());
  }
  const auto q = compute_quantile(scores, alpha);
  CalibrationModel model;
  model.alpha = alpha;
  model.scores = std::move(scores);
  model.q_bar = q.value;
  model.rank = q.rank;
  model.saturated = q.saturated;
  model.fingerprint = std::move(fingerprint);
  model.created_at = utc_now();
  model.dataset_ids = std::move(dataset_ids);
  return model;
}

CalibrationModel CalibrationModel::with_alpha(double new_alpha) const {
  auto out = *this;
  const auto q = compute_quantile(scores, new_alpha);
  out.alpha = new_alpha;
  out.q_bar = q.value;
  out.rank = q.rank;
  out.saturated = q.saturated;
  return out;
}

json CalibrationModel::to_json() const {
  json doc;
  doc["alpha"] = alpha;
  doc["scores"] = json::array();
  doc["scores_exact"] = json::array();
  for (const auto& s : scores) {
    doc["scores"].push_back(s.to_double());
    doc["scores_exact"].push_back(s.str());
  }
  doc["q_bar"] = q_bar.to_double();
  doc["q_bar_exact"] = q_bar.str();
  doc["rank"] = rank;
  doc["saturated"] = saturated;
  doc["fingerprint"] = fingerprint;
  doc["created_at"] = created_at;
  doc["dataset_ids"] = dataset_ids;
  return doc;
}

CalibrationModel CalibrationModel::from_json(const json& doc) {
  try {
    std::vector<Rational> scores;
    if (doc.contains("scores_exact")) {
      for (const auto& s : doc["scores_exact"]) scores.push_back(Rational::parse(s.get<std::string>()));
    } else {
      // Plain floats: recover the fraction over a denominator up to 10^6.
      for (const auto& s : doc.at("scores")) {
        scores.push_back(Rational(std::llround(s.get<double>() * 1e6), 1000000));
      }
    }
    auto model = make_calibration_model(std::move(scores), doc.at("alpha").get<double>(),
                                        doc.at("fingerprint").get<std::string>(),
                                        doc.value("dataset_ids", std::vector<std::string>{}));
    model.created_at = doc.value("created_at", model.created_at);
    return model;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("calibration model: ") + e.what());
  }
}

void CalibrationModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write calibration model " + path);
  out << to_json().dump(2) << "\n";
}

CalibrationModel CalibrationModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open calibration model " + path);
  const auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::InvalidArgument, "calibration model " + path + " is not valid JSON");
  return from_json(doc);
}

std::string config_fingerprint(const response::EngineConfig& config, const PromptTemplate& prompt_template,
                               bool auxiliary_enabled) {
  std::ostringstream key;
  key << "m=" << config.m << ";zeta=" << std::setprecision(17) << config.zeta << ";aux=" << auxiliary_enabled
      << ";rules=" << prompt_template.rules << ";shots=" << prompt_template.shots;
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(key.str());
  return hex.str();
}

}  // namespace nl2ltl::conformal

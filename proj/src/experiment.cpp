#include "nl2ltl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

#include "nl2ltl/calibration.hpp"
#include "nl2ltl/error.hpp"
#include "nl2ltl/translator.hpp"

namespace nl2ltl::experiment {

using nlohmann::json;

namespace {

struct RepResult {
  std::vector<metrics::MetricsSummary> by_alpha;
  std::vector<conformal::CalibrationModel> models;
};

gateway::ModelHandle simulated(std::string id, gateway::ModelRole role,
                               std::shared_ptr<const gateway::SimulatedProfile> profile, std::uint64_t seed) {
  return {std::move(id), role, std::make_shared<gateway::SimulatedBackend>(std::move(profile), seed)};
}

RepResult run_rep(const ExperimentConfig& config, const std::vector<Scenario>& corpus,
                  const std::shared_ptr<const gateway::SimulatedProfile>& primary,
                  const std::shared_ptr<const gateway::SimulatedProfile>& auxiliary,
                  const response::SimilarityFn& similarity, int rep) {
  const auto rep_seed = gateway::mix64(config.seed ^ gateway::mix64(static_cast<std::uint64_t>(rep) + 1));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(rep_seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Scenario> calib, test;
  for (std::size_t i = 0; i < config.calibration_size; ++i) calib.push_back(corpus[order[i]]);
  for (std::size_t i = 0; i < config.test_size; ++i) test.push_back(corpus[order[config.calibration_size + i]]);

  const auto calib_seed = gateway::mix64(rep_seed + 1);
  const auto test_seed = gateway::mix64(rep_seed + 2);
  auto handles = [&](std::uint64_t seed) {
    std::pair<gateway::ModelHandle, std::optional<gateway::ModelHandle>> h{
        simulated("primary", gateway::ModelRole::Primary, primary, seed), std::nullopt};
    if (config.auxiliary) {
      h.second = simulated("auxiliary", gateway::ModelRole::Auxiliary, auxiliary, gateway::mix64(seed ^ 0x5eed));
    }
    return h;
  };

  const auto [calib_primary, calib_aux] = handles(calib_seed);
  const calibration::CalibrationSetup setup{calib_primary,          calib_aux,  config.engine,
                                            config.prompt_template, similarity, config.h_max};
  calibration::CorpusLabeler labeler;
  const auto records = calibration::build_dataset(calib, setup, labeler);
  const auto base = calibration::build_calibration_model(records, config.alphas.front());

  RepResult out;
  for (const auto alpha : config.alphas) {
    auto model = base.with_alpha(alpha);
    // Fresh backends per alpha so every alpha sees the same draws.
    const auto [test_primary, test_aux] = handles(test_seed);
    translator::TranslatorOptions options{config.engine, config.prompt_template, similarity, config.h_max};
    const translator::Translator translator(test_primary, test_aux, model, options);
    translator::BenignUser user;
    std::vector<metrics::SessionOutcome> outcomes;
    for (const auto& scenario : test) {
      translator::TranslationSession session("rep" + std::to_string(rep) + "-" + scenario.id, scenario);
      translator::run_session(session, translator, user);
      outcomes.push_back(metrics::SessionOutcome::from_session(session));
    }
    out.by_alpha.push_back(metrics::summarize(outcomes, alpha));
    out.models.push_back(std::move(model));
  }
  return out;
}

}  // namespace

const AlphaResult& ExperimentResult::at(double alpha) const {
  for (const auto& r : by_alpha) {
    if (std::abs(r.alpha - alpha) < 1e-12) return r;
  }
  throw Error(Errc::InvalidArgument, "alpha " + std::to_string(alpha) + " was not part of the experiment");
}

json ExperimentResult::to_json() const {
  json rows = json::array();
  for (const auto& r : by_alpha) {
    json reps = json::array();
    for (const auto& s : r.per_rep) reps.push_back(s.to_json());
    rows.push_back({{"alpha", r.alpha},
                    {"mean", r.mean.to_json()},
                    {"q_bar", r.q_bar},
                    {"saturated_reps", r.saturated_reps},
                    {"per_rep", reps}});
  }
  return {{"auxiliary", auxiliary}, {"results", rows}};
}

ExperimentResult run_coverage_experiment(const ExperimentConfig& config, const std::vector<Scenario>& corpus,
                                         std::shared_ptr<const gateway::SimulatedProfile> primary,
                                         std::shared_ptr<const gateway::SimulatedProfile> auxiliary) {
  if (config.alphas.empty() || config.reps < 1 || config.calibration_size == 0 || config.test_size == 0) {
    throw Error(Errc::InvalidArgument, "experiment needs alphas, reps, calibration and test sizes");
  }
  if (corpus.size() < config.calibration_size + config.test_size) {
    throw Error(Errc::InsufficientCorpus, "corpus has " + std::to_string(corpus.size()) + " scenarios, need " +
                                              std::to_string(config.calibration_size + config.test_size));
  }
  for (const auto& s : corpus) {
    if (!s.ground_truth_tokens) throw Error(Errc::InsufficientCorpus, "scenario " + s.id + " has no ground truth");
  }
  if (!primary || (config.auxiliary && !auxiliary)) throw Error(Errc::InvalidArgument, "missing simulated profile");
  config.engine.validate();

  const auto similarity = response::default_similarity();
  std::vector<RepResult> reps;
  if (config.parallel) {
    std::vector<std::future<RepResult>> futures;
    for (int rep = 0; rep < config.reps; ++rep) {
      futures.push_back(std::async(std::launch::async, run_rep, std::cref(config), std::cref(corpus),
                                   std::cref(primary), std::cref(auxiliary), std::cref(similarity), rep));
    }
    for (auto& f : futures) reps.push_back(f.get());
  } else {
    for (int rep = 0; rep < config.reps; ++rep) {
      reps.push_back(run_rep(config, corpus, primary, auxiliary, similarity, rep));
    }
  }

  ExperimentResult result;
  result.auxiliary = config.auxiliary;
  for (std::size_t a = 0; a < config.alphas.size(); ++a) {
    AlphaResult row;
    row.alpha = config.alphas[a];
    for (const auto& rep : reps) {
      row.per_rep.push_back(rep.by_alpha[a]);
      row.q_bar.push_back(rep.models[a].q_bar.to_double());
      row.saturated_reps += rep.models[a].saturated;
    }
    row.mean = metrics::mean_summary(row.per_rep);
    result.by_alpha.push_back(std::move(row));
  }
  return result;
}

}  // namespace nl2ltl::experiment

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "nl2ltl/calibration.hpp"
#include "nl2ltl/experiment.hpp"
#include "nl2ltl/synthetic.hpp"
#include "support.hpp"

using namespace nl2ltl;
using response::ResponseDistribution;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail << "first failure: " << what << "; ";
    }
  }
};

int failures = 0;

void criterion(int n, const std::string& name, double budget_seconds, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << "exception: " << e.what() << "; ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(secs < budget_seconds, "runtime " + std::to_string(secs) + " s over budget");
  std::printf("%s criterion %d (%s): %s[%.2f s of %.0f s]\n", o.pass ? "PASS" : "FAIL", n, name.c_str(),
              o.detail.str().c_str(), secs, budget_seconds);
  std::fflush(stdout);
  failures += !o.pass;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// ---------------------------------------------------------------------------

void example_fidelity(Outcome& o) {
  const std::vector<std::string> samples = {"p_red_box", "p_red_box", "p_red_package", "p_green_bottle", "pre%blocks"};
  const auto model = testsupport::script_handle({{3, samples}});
  PromptContext prompt;
  prompt.task = "Pick up the red box and put it down in storage.";
  prompt.status = {"F", "("};
  prompt.k = 3;
  const auto d = response::get_responses(model, prompt, {5, 0.75}, ltl::all_skills(),
                                         testsupport::stub_similarity({{{"p_red_box", "p_red_package"}, 0.8}}));
  o.require(d.m_k == 4, "m_k");
  o.require(d.entries.size() == 2, "entry count");
  o.require(d.frequency_of("p_red_box") == Rational(3, 4), "p_red_box 3/4");
  o.require(d.frequency_of("p_green_bottle") == Rational(1, 4), "p_green_bottle 1/4");
  o.detail << "p_red_box " << d.frequency_of("p_red_box").str() << ", p_green_bottle "
           << d.frequency_of("p_green_bottle").str() << ", m_k " << d.m_k << " ";
}

void quantile_oracle(Outcome& o) {
  std::mt19937_64 rng(1009);
  int saturated = 0;
  for (int round = 0; round < 1000; ++round) {
    const std::size_t d = 1 + rng() % 500;
    const int bp = 100 + static_cast<int>(rng() % 4901);
    std::vector<Rational> scores;
    for (std::size_t i = 0; i < d; ++i) {
      const std::int64_t den = 1 + static_cast<std::int64_t>(rng() % 12);
      scores.push_back(Rational(static_cast<std::int64_t>(rng() % (den + 1)), den));
    }
    const auto q = conformal::compute_quantile(scores, bp / 10000.0);
    const auto [expected, sat] = testsupport::quantile_oracle(scores, bp);
    o.require(q.value == expected && q.saturated == sat, "instance " + std::to_string(round));
    saturated += sat;
  }
  const auto forced = conformal::compute_quantile(std::vector<double>{0.1, 0.2}, 0.01);
  o.require(forced.saturated && forced.value == 1.0, "saturation at D=2, alpha=0.01");
  o.require(saturated > 0, "no random saturated instance");
  o.detail << "1000 instances, " << saturated << " saturated ";
}

struct CoverageRuns {
  experiment::ExperimentResult with_aux;
  experiment::ExperimentResult without_aux;
};

CoverageRuns run_coverage() {
  synthetic::SyntheticOptions so;
  so.n_scenarios = 400;
  so.min_tokens = 3;
  so.max_tokens = 12;
  const auto corpus = synthetic::generate(so);
  experiment::ExperimentConfig cfg;
  cfg.alphas = {0.05, 0.03, 0.01};
  cfg.calibration_size = 200;
  cfg.test_size = 200;
  cfg.reps = 10;
  CoverageRuns runs;
  runs.with_aux = experiment::run_coverage_experiment(cfg, corpus.scenarios, corpus.primary, corpus.auxiliary);
  cfg.auxiliary = false;
  runs.without_aux = experiment::run_coverage_experiment(cfg, corpus.scenarios, corpus.primary, corpus.auxiliary);
  return runs;
}

void coverage(Outcome& o, const CoverageRuns& runs) {
  for (double alpha : {0.05, 0.03, 0.01}) {
    const double rate = runs.with_aux.at(alpha).mean.success_rate;
    o.require(rate >= 1 - alpha - 0.03, "alpha " + fmt(alpha) + " below 1-alpha-0.03");
    o.require(rate <= 1 - alpha + 0.05, "alpha " + fmt(alpha) + " above 1-alpha+0.05");
    o.detail << "alpha=" << alpha << " success=" << fmt(rate) << " ";
  }
}

void help_monotonicity(Outcome& o, const CoverageRuns& runs) {
  const std::vector<double> alphas = {0.05, 0.03, 0.01};
  for (std::size_t i = 0; i + 1 < alphas.size(); ++i) {
    const auto& a = runs.with_aux.at(alphas[i]).mean;
    const auto& b = runs.with_aux.at(alphas[i + 1]).mean;
    o.require(b.help_rate >= a.help_rate - 0.005, "help rate inversion at alpha " + fmt(alphas[i + 1]));
    o.require(b.h_f >= a.h_f - 0.005, "H_f inversion at alpha " + fmt(alphas[i + 1]));
  }
  for (double alpha : alphas) {
    const auto& m = runs.with_aux.at(alpha).mean;
    o.detail << "alpha=" << alpha << " help=" << fmt(m.help_rate) << " H_f=" << fmt(m.h_f) << " ";
  }
}

void auxiliary_ablation(Outcome& o, const CoverageRuns& runs) {
  for (double alpha : {0.05, 0.03, 0.01}) {
    const auto& with = runs.with_aux.at(alpha).mean;
    const auto& without = runs.without_aux.at(alpha).mean;
    o.require(without.help_rate >= with.help_rate, "help rate at alpha " + fmt(alpha));
    o.require(without.h_f >= with.h_f, "H_f at alpha " + fmt(alpha));
    o.detail << "alpha=" << alpha << " help " << fmt(with.help_rate) << "->" << fmt(without.help_rate) << " H_f "
             << fmt(with.h_f) << "->" << fmt(without.h_f) << " ";
  }
}

bool member(const conformal::PredictionSet& s, const std::string& r) { return s.saturated || s.contains(r); }

void proposition_structure(Outcome& o) {
  std::mt19937_64 rng(4242);
  const std::vector<std::string> alphabet = {"F", "G", "U", "p_box_1", "dock_2", "pd", "/"};
  const std::string unseen = "X";
  int saturated_instances = 0;
  for (int round = 0; round < 500; ++round) {
    const std::size_t steps = 1 + rng() % 3;
    const int m = 2 + static_cast<int>(rng() % 9);
    const bool saturate = rng() % 10 == 0;
    const Rational q_bar = saturate ? Rational(1) : Rational(static_cast<std::int64_t>(rng() % 20), 20);
    saturated_instances += saturate;

    std::vector<ResponseDistribution> primary, auxiliary;
    std::vector<conformal::PredictionSet> inter, local;
    std::vector<std::vector<std::string>> domain;
    for (std::size_t k = 0; k < steps; ++k) {
      // At most 4 distinct candidates per step.
      std::vector<std::string> pool = alphabet;
      std::shuffle(pool.begin(), pool.end(), rng);
      pool.resize(1 + rng() % 4);
      primary.push_back(testsupport::random_distribution(rng, pool, m));
      auxiliary.push_back(testsupport::random_distribution(rng, pool, m));
      const auto cp = conformal::prediction_set(primary.back(), q_bar);
      const auto ca = conformal::prediction_set(auxiliary.back(), q_bar);
      inter.push_back(conformal::intersect_sets(cp, ca));
      local.push_back(conformal::step_set(cp, ca));
      auto d = pool;
      d.push_back(unseen);
      domain.push_back(d);
    }

    // Every sequence over the step domains: min frequency >= 1 - q_bar iff it lies in the product.
    std::vector<std::string> seq(steps);
    std::function<void(std::size_t)> walk = [&](std::size_t k) {
      if (k == steps) {
        const Rational f_bar = Rational(1) - conformal::compute_ncs([&] {
          std::vector<conformal::StepFrequencies> t;
          for (std::size_t i = 0; i < steps; ++i) {
            t.push_back({primary[i].frequency_of(seq[i]), auxiliary[i].frequency_of(seq[i])});
          }
          return t;
        }());
        const bool in_formula_set = saturate || f_bar >= Rational(1) - q_bar;
        bool in_product = true;
        for (std::size_t i = 0; i < steps; ++i) in_product = in_product && member(inter[i], seq[i]);
        o.require(in_formula_set == in_product, "sequence set, instance " + std::to_string(round));
        return;
      }
      for (const auto& t : domain[k]) {
        seq[k] = t;
        walk(k + 1);
      }
    };
    walk(0);

    // Each step set contains the intersection.
    for (std::size_t k = 0; k < steps; ++k) {
      for (const auto& t : domain[k]) {
        if (member(inter[k], t)) o.require(member(local[k], t), "step set, instance " + std::to_string(round));
      }
      o.require(!saturate || (inter[k].saturated && local[k].saturated), "saturation flags");
    }
  }
  o.detail << "500 instances, " << saturated_instances << " with q_bar = 1 ";
}

void parser_and_evaluator(Outcome& o) {
  const auto corpus = load_corpus(std::string(NL2LTL_DATA_DIR) + "/corpus.jsonl");
  bool hard_seen = false;
  std::size_t formulas = 0;
  for (const auto& s : corpus) {
    for (auto seq : s.correct_sequences()) {
      const auto f = ltl::parse_tokens(seq);
      const auto rendered = ltl::render_formula(f);
      const auto again = ltl::parse_tokens(rendered);
      o.require(again == f && ltl::render_formula(again) == rendered, "round-trip of " + s.id);
      ++formulas;
    }
  }
  const auto hard = ltl::parse_text("¬region_5 U street_4 ∧ ◊(house_4 ∧ ◊(p_pass_4 ∧ ◊(office_1 ∧ pd)))");
  for (const auto& s : corpus) {
    if (s.ground_truth_tokens && ltl::parse_tokens(*s.ground_truth_tokens) == hard) hard_seen = true;
  }
  o.require(hard_seen, "hard example missing from the corpus");
  o.require(ltl::parse_tokens(ltl::render_formula(hard)) == hard, "hard example round-trip");

  std::size_t checks = 0;
  auto grid = [&](const std::vector<std::string>& atoms, int depth, std::size_t max_len) {
    const auto formulas = testsupport::all_formulas(atoms, depth);
    const auto traces = testsupport::all_traces(atoms, max_len);
    std::vector<ltl::Trace> built;
    for (const auto& t : traces) built.emplace_back(t);
    for (const auto& f : formulas) {
      for (std::size_t i = 0; i < traces.size(); ++i) {
        if (ltl::evaluate_on_trace(f, built[i]) != testsupport::holds(f, traces[i], 0)) {
          o.require(false, "evaluator disagrees on " + f.str());
          return;
        }
        ++checks;
      }
    }
  };
  grid({"a", "b", "c"}, 2, 5);
  grid({"a", "b", "c"}, 3, 3);
  grid({"a", "b"}, 3, 4);

  std::mt19937_64 rng(99);
  const std::vector<std::string> atoms = {"a", "b", "c"};
  const auto traces = testsupport::all_traces(atoms, 5);
  std::vector<ltl::Trace> built;
  for (const auto& t : traces) built.emplace_back(t);
  for (int i = 0; i < 2000; ++i) {
    const auto f = testsupport::random_formula_of_depth(rng, atoms, 4);
    for (int j = 0; j < 200; ++j) {
      const auto ti = rng() % traces.size();
      if (ltl::evaluate_on_trace(f, built[ti]) != testsupport::holds(f, traces[ti], 0)) {
        o.require(false, "evaluator disagrees on " + f.str());
        break;
      }
      ++checks;
    }
  }
  o.detail << formulas << " corpus formulas, " << checks << " evaluator checks ";
}

void ncs_rule(Outcome& o) {
  synthetic::SyntheticOptions so;
  so.n_scenarios = 200;
  so.seed = 77;
  so.failure_rate = 0.01;
  const auto corpus = synthetic::generate(so);
  calibration::CalibrationSetup setup;
  setup.primary = {"primary", gateway::ModelRole::Primary, std::make_shared<gateway::SimulatedBackend>(corpus.primary, 1)};
  setup.auxiliary =
      gateway::ModelHandle{"auxiliary", gateway::ModelRole::Auxiliary,
                           std::make_shared<gateway::SimulatedBackend>(corpus.auxiliary, 2)};
  calibration::CorpusLabeler labeler;
  const auto records = calibration::build_dataset(corpus.scenarios, setup, labeler);
  std::size_t typed = 0;
  for (const auto& r : records) {
    if (r.has_user_typed_step()) {
      ++typed;
      o.require(r.ncs == Rational(1), "typed record " + r.scenario_id + " has ncs " + r.ncs.str());
    }
    o.require(r.ncs == conformal::compute_ncs(r.truth_frequencies()), "record score " + r.scenario_id);
  }
  o.require(typed > 0, "no record with a typed step");

  std::mt19937_64 rng(2718);
  for (int round = 0; round < 1000; ++round) {
    const int steps = 1 + static_cast<int>(rng() % 16);
    const bool aux = rng() % 2 == 0;
    std::vector<conformal::StepFrequencies> table;
    std::vector<Rational> all;
    for (int k = 0; k < steps; ++k) {
      const std::int64_t m = 1 + static_cast<std::int64_t>(rng() % 20);
      conformal::StepFrequencies s{Rational(static_cast<std::int64_t>(rng() % (m + 1)), m), std::nullopt};
      all.push_back(s.primary);
      if (aux) {
        s.auxiliary = Rational(static_cast<std::int64_t>(rng() % (m + 1)), m);
        all.push_back(*s.auxiliary);
      }
      table.push_back(s);
    }
    const auto lowest = *std::min_element(all.begin(), all.end());
    o.require(conformal::compute_ncs(table) == Rational(1) - lowest, "table " + std::to_string(round));
  }
  o.detail << records.size() << " records, " << typed << " with typed steps; 1000 tables ";
}

}  // namespace

int main() {
  criterion(1, "pick-and-place step frequencies", 1, example_fidelity);
  criterion(2, "quantile oracle equivalence", 5, quantile_oracle);

  CoverageRuns runs;
  double coverage_secs = 0;
  {
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      runs = run_coverage();
    } catch (const std::exception& e) {
      error = e.what();
    }
    coverage_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!error.empty()) {
      for (int n : {3, 4, 5}) std::printf("FAIL criterion %d: experiment raised %s\n", n, error.c_str());
      failures += 3;
      runs.with_aux.by_alpha.clear();
    }
  }
  if (!runs.with_aux.by_alpha.empty()) {
    criterion(3, "coverage at desk scale", 120, [&](Outcome& o) {
      coverage(o, runs);
      o.require(coverage_secs < 120, "experiment runtime " + std::to_string(coverage_secs) + " s");
      o.detail << "experiment " << fmt(coverage_secs) << " s ";
    });
    criterion(4, "help monotonicity", 120, [&](Outcome& o) { help_monotonicity(o, runs); });
    criterion(5, "auxiliary ablation trend", 120, [&](Outcome& o) { auxiliary_ablation(o, runs); });
  }

  criterion(6, "prediction-set structure", 10, proposition_structure);
  criterion(7, "parser round-trip and evaluator oracle", 10, parser_and_evaluator);
  criterion(8, "score rule for typed steps", 2, ncs_rule);

  std::printf("%s: %d of 8 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}

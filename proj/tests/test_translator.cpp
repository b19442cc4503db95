#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "nl2ltl/synthetic.hpp"
#include "nl2ltl/translator.hpp"
#include "support.hpp"

using namespace nl2ltl;
using namespace nl2ltl::translator;
using testsupport::errc_of;

namespace {

using Script = std::map<int, std::vector<std::string>>;

std::vector<std::string> repeat(std::vector<std::pair<std::string, int>> counts) {
  std::vector<std::string> out;
  for (auto& [r, c] : counts) out.insert(out.end(), c, r);
  return out;
}

Scenario box_scenario() {
  Scenario s;
  s.id = "box";
  s.nl_task = "Pick up the red box and put it down in storage.";
  s.skills = {ltl::Skill::MoveTo, ltl::Skill::PickUp, ltl::Skill::PutDown};
  s.ground_truth_tokens = std::vector<std::string>{"F", "(", "p_red_box", "&", "F", "(", "storage", "&", "pd", ")", ")"};
  return s;
}

Scenario pd_scenario() {
  Scenario s;
  s.id = "pd";
  s.nl_task = "Eventually put the item down.";
  s.skills = {ltl::Skill::PutDown, ltl::Skill::TakePhoto};
  s.ground_truth_tokens = std::vector<std::string>{"F", "pd"};
  return s;
}

TranslatorOptions options() {
  TranslatorOptions o;
  o.config = {10, 0.75};
  o.similarity = testsupport::stub_similarity({});
  return o;
}

/// Translator whose quantile is exactly `q_bar`.
Translator make_translator(Script primary, std::optional<Script> auxiliary, Rational q_bar,
                           TranslatorOptions opts = options()) {
  const auto fp = conformal::config_fingerprint(opts.config, opts.prompt_template, auxiliary.has_value());
  std::optional<gateway::ModelHandle> aux;
  if (auxiliary) aux = testsupport::script_handle(std::move(*auxiliary), gateway::ModelRole::Auxiliary);
  return Translator(testsupport::script_handle(std::move(primary)), std::move(aux),
                    conformal::make_calibration_model({q_bar}, 0.5, fp), std::move(opts));
}

const Script kEasyPrimary = {{1, repeat({{"F", 9}, {"G", 1}})}, {2, repeat({{"pd", 10}})}, {3, repeat({{"/", 10}})}};

}  // namespace

TEST_CASE("build_prompt") {
  const auto t = PromptTemplate::default_template();
  const auto p = build_prompt(box_scenario(), {"F", "("}, 3, t);
  CHECK(p.k == 3);
  CHECK(p.status == std::vector<std::string>{"F", "("});
  CHECK(p.task == box_scenario().nl_task);
  CHECK(p.rules == t.rules);
  CHECK(p.shots == t.shots);
  CHECK(build_prompt(box_scenario(), {}, 1, t).status.empty());
  CHECK(errc_of([&] { build_prompt(box_scenario(), {"F"}, 3, t); }) == Errc::InvalidArgument);
}

TEST_CASE("primary singleton is accepted without the auxiliary model") {
  Script aux = {};  // any auxiliary call would raise ProfileMiss
  const auto tr = make_translator(kEasyPrimary, aux, Rational(2, 10));
  TranslationSession s("s1", pd_scenario());
  tr.advance_step(s);
  CHECK(s.running());
  CHECK(s.partial_tokens() == std::vector<std::string>{"F"});
  CHECK(s.transcript().back().source == ChoiceSource::PrimarySingleton);
  CHECK_FALSE(s.transcript().back().auxiliary.has_value());
  tr.advance_step(s);
  tr.advance_step(s);
  CHECK(s.status_name() == "Succeeded");
  CHECK(s.correct());
  CHECK(s.accepted_steps() == 3);
  CHECK(s.user_choices() == 0);
}

TEST_CASE("intersection singleton") {
  Script primary = {{1, repeat({{"F", 6}, {"G", 4}})}};
  Script aux = {{1, repeat({{"F", 7}, {"X", 3}})}};
  const auto tr = make_translator(primary, aux, Rational(6, 10));
  TranslationSession s("s", pd_scenario());
  tr.advance_step(s);
  CHECK(s.partial_tokens() == std::vector<std::string>{"F"});
  CHECK(s.transcript().back().source == ChoiceSource::IntersectionSingleton);
  REQUIRE(s.transcript().back().intersection.has_value());
  CHECK(s.transcript().back().intersection->members.front().frequency == Rational(6, 10));
}

TEST_CASE("help request lists the intersection in primary order") {
  Script primary = {{1, repeat({{"F", 5}, {"G", 3}, {"X", 2}})}};
  Script aux = {{1, repeat({{"X", 4}, {"G", 3}, {"F", 3}})}};
  const auto tr = make_translator(primary, aux, Rational(8, 10));
  TranslationSession s("s", pd_scenario());
  tr.advance_step(s);
  REQUIRE(s.awaiting_help());
  const auto& req = std::get<AwaitingHelp>(s.status()).request;
  REQUIRE(req.candidates.size() == 3);
  CHECK(req.candidates[0].response == "F");
  CHECK(req.candidates[1].response == "G");
  CHECK(req.candidates[2].response == "X");
  CHECK(req.candidates[2].frequency == Rational(2, 10));
  CHECK(req.k == 1);
  CHECK(req.session_id == "s");

  tr.apply_help_choice(s, HelpDecision::select("F"));
  CHECK(s.running());
  CHECK(s.transcript().back().source == ChoiceSource::UserChoice);
  CHECK(s.user_choices() == 1);
  CHECK(errc_of([&] { tr.apply_help_choice(s, HelpDecision::select("F")); }) == Errc::NotAwaitingHelp);
}

TEST_CASE("help choices outside the candidates are refused; halting fails the session") {
  Script primary = {{1, repeat({{"F", 5}, {"G", 5}})}};
  const auto tr = make_translator(primary, std::nullopt, Rational(6, 10));
  TranslationSession s("s", pd_scenario());
  tr.advance_step(s);
  REQUIRE(s.awaiting_help());
  CHECK(errc_of([&] { tr.apply_help_choice(s, HelpDecision::select("X")); }) == Errc::UnknownCandidate);
  CHECK(s.awaiting_help());
  tr.apply_help_choice(s, HelpDecision::halt());
  CHECK(s.status_name() == "Failed");
  CHECK(std::get<Failed>(s.status()).reason == FailureReason::UserHalted);
}

TEST_CASE("empty primary set and empty intersection") {
  {
    Script primary = {{1, repeat({{"F", 5}, {"G", 5}})}};
    const auto tr = make_translator(primary, Script{}, Rational(4, 10));
    TranslationSession s("s", pd_scenario());
    tr.advance_step(s);
    CHECK(std::get<Failed>(s.status()).reason == FailureReason::EmptyPrimarySet);
  }
  {
    Script primary = {{1, repeat({{"F", 5}, {"G", 5}})}};
    Script aux = {{1, repeat({{"X", 10}})}};
    const auto tr = make_translator(primary, aux, Rational(6, 10));
    TranslationSession s("s", pd_scenario());
    tr.advance_step(s);
    CHECK(std::get<Failed>(s.status()).reason == FailureReason::EmptyIntersection);
  }
  {
    Script primary = {{1, repeat({{"hello world", 10}})}};
    const auto tr = make_translator(primary, std::nullopt, Rational(9, 10));
    TranslationSession s("s", pd_scenario());
    tr.advance_step(s);
    CHECK(std::get<Failed>(s.status()).reason == FailureReason::EmptyPrimarySet);
    CHECK(s.transcript().back().primary.m_k == 0);
  }
}

TEST_CASE("fingerprint mismatch is refused") {
  auto opts = options();
  const auto fp = conformal::config_fingerprint({5, 0.75}, opts.prompt_template, false);
  const Translator tr(testsupport::script_handle(kEasyPrimary), std::nullopt,
                      conformal::make_calibration_model({Rational(1, 5)}, 0.5, fp), opts);
  TranslationSession s("s", pd_scenario());
  CHECK(errc_of([&] { tr.advance_step(s); }) == Errc::ConfigFingerprintMismatch);
  CHECK(s.running());
  CHECK(s.transcript().empty());
}

TEST_CASE("backend outages leave the session running; profile misses fail it") {
  auto backend = std::make_shared<testsupport::ScriptBackend>(kEasyPrimary);
  auto opts = options();
  const auto fp = conformal::config_fingerprint(opts.config, opts.prompt_template, false);
  const Translator tr({"primary", gateway::ModelRole::Primary, backend}, std::nullopt,
                      conformal::make_calibration_model({Rational(1, 5)}, 0.5, fp), opts);
  TranslationSession s("s", pd_scenario());
  backend->fail_next(1);
  CHECK(errc_of([&] { tr.advance_step(s); }) == Errc::BackendUnavailable);
  CHECK(s.running());
  CHECK(s.k() == 1);
  CHECK(s.transcript().empty());
  tr.advance_step(s);
  CHECK(s.partial_tokens() == std::vector<std::string>{"F"});

  const auto missing = make_translator({{1, repeat({{"F", 10}})}}, std::nullopt, Rational(1, 5));
  TranslationSession t("t", pd_scenario());
  missing.advance_step(t);
  missing.advance_step(t);
  CHECK(std::get<Failed>(t.status()).reason == FailureReason::BackendError);
}

TEST_CASE("end marker before a complete formula is malformed") {
  const auto tr = make_translator({{1, repeat({{"F", 10}})}, {2, repeat({{"/", 10}})}}, std::nullopt, Rational(1, 5));
  TranslationSession s("s", pd_scenario());
  tr.advance_step(s);
  tr.advance_step(s);
  CHECK(std::get<Failed>(s.status()).reason == FailureReason::MalformedFormula);
}

TEST_CASE("sessions are truncated after the step limit, the end marker counts as a step") {
  auto opts = options();
  opts.h_max = 3;
  Script loop = {{1, repeat({{"F", 10}})}, {2, repeat({{"F", 10}})}, {3, repeat({{"F", 10}})}};
  const auto tr = make_translator(loop, std::nullopt, Rational(1, 5), opts);
  TranslationSession s("s", pd_scenario());
  for (int i = 0; i < 3; ++i) tr.advance_step(s);
  CHECK(s.status_name() == "Truncated");

  Script done = {{1, repeat({{"F", 10}})}, {2, repeat({{"pd", 10}})}, {3, repeat({{"/", 10}})}};
  const auto ok = make_translator(done, std::nullopt, Rational(1, 5), opts);
  TranslationSession t("t", pd_scenario());
  for (int i = 0; i < 3; ++i) ok.advance_step(t);
  CHECK(t.status_name() == "Succeeded");
}

TEST_CASE("translate_ua takes the argmax") {
  Script primary = {{1, repeat({{"F", 6}, {"G", 4}})}, {2, repeat({{"pd", 5}, {"photo", 5}})}, {3, repeat({{"/", 10}})}};
  const auto r = translate_ua(pd_scenario(), testsupport::script_handle(primary), options());
  CHECK(r.tokens == std::vector<std::string>{"F", "pd", "/"});
  REQUIRE(r.formula.has_value());
  CHECK_FALSE(r.failure.has_value());

  Script empty = {{1, repeat({{"not valid", 10}})}};
  CHECK(translate_ua(pd_scenario(), testsupport::script_handle(empty), options()).failure ==
        FailureReason::EmptyDistribution);
}

TEST_CASE("run_session with scripted decisions") {
  Script primary = {{1, repeat({{"F", 5}, {"G", 5}})}, {2, repeat({{"pd", 10}})}, {3, repeat({{"/", 10}})}};
  const auto tr = make_translator(primary, std::nullopt, Rational(6, 10));
  const auto path = (testsupport::temp_dir("decisions") / "d.json").string();
  std::ofstream(path) << R"([{"action": "select", "response": "F"}, "halt"])";
  auto user = ScriptedUser::load(path);
  TranslationSession s("s", pd_scenario());
  run_session(s, tr, user);
  CHECK(s.correct());
  CHECK(user.remaining() == 1);

  BenignUser benign;
  TranslationSession t("t", pd_scenario());
  run_session(t, tr, benign);
  CHECK(t.correct());
  CHECK(t.user_choices() == 1);
  CHECK(errc_of([] { ScriptedUser::load("/nonexistent/decisions.json"); }) == Errc::Io);
}

TEST_CASE("help is requested exactly when the step set has more than one member") {
  std::mt19937_64 rng(19);
  const std::vector<std::string> alphabet = {"F", "G", "X", "pd", "photo", "/"};
  for (int round = 0; round < 500; ++round) {
    auto dp = testsupport::random_distribution(rng, alphabet, 10);
    auto da = testsupport::random_distribution(rng, alphabet, 10);
    if (dp.m_k < 2 || da.m_k < 2) continue;
    Script primary = {{1, {}}}, aux = {{1, {}}};
    for (const auto& e : dp.entries) primary[1].insert(primary[1].end(), e.count, e.response);
    for (const auto& e : da.entries) aux[1].insert(aux[1].end(), e.count, e.response);
    auto opts = options();
    opts.config.m = dp.m_k;
    // The auxiliary script cycles when m exceeds its length; rebuild its distribution accordingly.
    std::map<std::string, int> aux_counts;
    for (int i = 0; i < dp.m_k; ++i) ++aux_counts[aux[1][i % aux[1].size()]];

    bool helped_before = false;
    for (int qn = 0; qn <= 10; ++qn) {
      const Rational q(qn, 10);
      const auto tr = make_translator(primary, aux, q, opts);
      TranslationSession s("s", pd_scenario());
      tr.advance_step(s);

      std::vector<std::string> p_set, a_set;
      for (const auto& e : dp.entries) {
        if (e.frequency >= Rational(1) - q) p_set.push_back(e.response);
      }
      for (const auto& [r, c] : aux_counts) {
        if (Rational(c, dp.m_k) >= Rational(1) - q) a_set.push_back(r);
      }
      std::size_t step_size = p_set.size();
      if (p_set.size() > 1) {
        step_size = 0;
        for (const auto& r : p_set) step_size += std::count(a_set.begin(), a_set.end(), r);
      }
      REQUIRE(s.awaiting_help() == (step_size > 1));
      if (helped_before) REQUIRE(s.awaiting_help());
      helped_before = s.awaiting_help();
    }
  }
}

TEST_CASE("simulated sessions replay identically") {
  synthetic::SyntheticOptions so;
  so.n_scenarios = 20;
  const auto corpus = synthetic::generate(so);
  auto opts = options();
  opts.similarity = response::default_similarity();
  const auto fp = conformal::config_fingerprint(opts.config, opts.prompt_template, true);
  auto run = [&] {
    const Translator tr({"p", gateway::ModelRole::Primary, std::make_shared<gateway::SimulatedBackend>(corpus.primary, 11)},
                        gateway::ModelHandle{"a", gateway::ModelRole::Auxiliary,
                                             std::make_shared<gateway::SimulatedBackend>(corpus.auxiliary, 12)},
                        conformal::make_calibration_model({Rational(3, 10)}, 0.5, fp), opts);
    std::string out;
    BenignUser user;
    for (const auto& sc : corpus.scenarios) {
      TranslationSession s(sc.id, sc);
      run_session(s, tr, user);
      out += s.to_json().dump() + "\n";
    }
    return out;
  };
  CHECK(run() == run());
}

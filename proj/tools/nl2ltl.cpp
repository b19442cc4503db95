// Command-line front end: calibrate, translate, evaluate, serve, experiment.
#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "nl2ltl/calibration.hpp"
#include "nl2ltl/error.hpp"
#include "nl2ltl/experiment.hpp"
#include "nl2ltl/metrics.hpp"
#include "nl2ltl/service.hpp"
#include "nl2ltl/synthetic.hpp"
#include "nl2ltl/translator.hpp"

using namespace nl2ltl;
using nlohmann::json;

namespace {

constexpr int kExitFailed = 2;
constexpr int kExitConfig = 3;

struct RunConfig {
  double alpha = 0.05;
  int m = 10;
  double zeta = 0.75;
  int h_max = translator::kDefaultMaxSteps;
  std::string backend;
  std::string aux_backend;
  bool no_aux = false;
  std::string template_path;
  std::string embedding;
  std::optional<std::uint64_t> seed;
  std::string corpus;
  std::string model_path;
  std::string out;
};

void add_engine_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--m", rc.m, "Samples per step")->check(CLI::Range(2, 1000));
  cmd->add_option("--zeta", rc.zeta, "Similarity merge threshold")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--h-max", rc.h_max, "Maximum number of steps")->check(CLI::PositiveNumber);
  cmd->add_option("--template", rc.template_path, "Prompt template JSON {\"rules\", \"shots\"}");
  cmd->add_option("--embedding", rc.embedding, "Embedding service remote:<endpoint>[#model]; trigram fallback otherwise");
  cmd->add_option("--seed", rc.seed, "Seed for simulated backends");
}

void add_backend_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--backend", rc.backend, "Primary model: simulated:<profile.json> or remote:<endpoint>[#model]")
      ->required();
  cmd->add_option("--aux-backend", rc.aux_backend, "Auxiliary model, same syntax as --backend");
  cmd->add_flag("--no-aux", rc.no_aux, "Run without the auxiliary model");
}

std::shared_ptr<gateway::ModelBackend> backend_from_spec(const std::string& spec, std::optional<std::uint64_t> seed) {
  const std::string prefix = "simulated:";
  if (seed && spec.rfind(prefix, 0) == 0) {
    auto profile = std::make_shared<const gateway::SimulatedProfile>(gateway::SimulatedProfile::load(spec.substr(prefix.size())));
    return std::make_shared<gateway::SimulatedBackend>(std::move(profile), *seed);
  }
  return gateway::make_backend(spec);
}

gateway::ModelHandle primary_handle(const RunConfig& rc) {
  return {"primary", gateway::ModelRole::Primary, backend_from_spec(rc.backend, rc.seed)};
}

std::optional<gateway::ModelHandle> auxiliary_handle(const RunConfig& rc) {
  if (rc.no_aux || rc.aux_backend.empty()) return std::nullopt;
  std::optional<std::uint64_t> seed;
  if (rc.seed) seed = gateway::mix64(*rc.seed ^ 0x5eed);
  return gateway::ModelHandle{"auxiliary", gateway::ModelRole::Auxiliary, backend_from_spec(rc.aux_backend, seed)};
}

translator::TranslatorOptions translator_options(const RunConfig& rc) {
  translator::TranslatorOptions o;
  o.config = {rc.m, rc.zeta};
  o.config.validate();
  if (!rc.template_path.empty()) o.prompt_template = PromptTemplate::load(rc.template_path);
  if (!rc.embedding.empty()) {
    const auto spec = rc.embedding;
    if (spec.rfind("remote:", 0) != 0) throw Error(Errc::InvalidArgument, "embedding spec must be remote:<endpoint>");
    gateway::RemoteConfig cfg;
    const auto rest = spec.substr(7);
    const auto hash = rest.find('#');
    cfg.endpoint = rest.substr(0, hash);
    cfg.model = hash == std::string::npos ? "text-embedding-3-small" : rest.substr(hash + 1);
    cfg.token_env = "NL2LTL_API_KEY";
    o.similarity = response::make_similarity(
        std::make_shared<gateway::CachingEmbedder>(std::make_shared<gateway::RemoteEmbedder>(cfg)));
  }
  o.h_max = rc.h_max;
  return o;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out << text;
}

void warn_saturated(const conformal::CalibrationModel& model) {
  if (!model.saturated) return;
  std::cerr << "warning: rank " << model.rank << " exceeds the " << model.scores.size()
            << " calibration scores; q_bar = 1 and every observed response enters the prediction sets\n";
}

// ---------------------------------------------------------------------------

int cmd_calibrate(const RunConfig& rc, const std::string& records_path) {
  const auto corpus = load_corpus(rc.corpus);
  const auto options = translator_options(rc);
  calibration::CalibrationSetup setup{primary_handle(rc), auxiliary_handle(rc), options.config,
                                      options.prompt_template, options.similarity, options.h_max};
  calibration::CorpusLabeler labeler;
  const auto records = calibration::build_dataset(corpus, setup, labeler);
  if (!records_path.empty()) calibration::save_records(records, records_path);
  const auto model = calibration::build_calibration_model(records, rc.alpha);
  warn_saturated(model);
  if (rc.model_path.empty()) {
    std::cout << model.to_json().dump(2) << "\n";
  } else {
    model.save(rc.model_path);
  }
  std::size_t typed = 0;
  for (const auto& r : records) typed += r.has_user_typed_step();
  std::cerr << "calibrated on " << records.size() << " scenarios (" << typed << " with typed-in steps), q_bar = "
            << model.q_bar.str() << " (rank " << model.rank << ")\n";
  return 0;
}

/// Asks on the terminal.
class StdinUser final : public translator::HelpResponder {
 public:
  translator::HelpDecision decide(const translator::TranslationSession& session,
                                  const translator::HelpRequest& request) override {
    std::cerr << "\n" << session.scenario().nl_task << "\nformula so far: " << ltl::join_tokens(request.partial)
              << "\nstep " << request.k << " candidates:\n";
    for (std::size_t i = 0; i < request.candidates.size(); ++i) {
      std::cerr << "  [" << i + 1 << "] " << request.candidates[i].response << "  (" 
                << request.candidates[i].frequency.to_double() << ")\n";
    }
    while (true) {
      std::cerr << "choose 1-" << request.candidates.size() << " or 'halt': " << std::flush;
      std::string line;
      if (!std::getline(std::cin, line) || line == "halt") return translator::HelpDecision::halt();
      try {
        const auto i = std::stoul(line);
        if (i >= 1 && i <= request.candidates.size()) {
          return translator::HelpDecision::select(request.candidates[i - 1].response);
        }
      } catch (const std::exception&) {
      }
      for (const auto& c : request.candidates) {
        if (c.response == line) return translator::HelpDecision::select(line);
      }
    }
  }
};

int cmd_translate(const RunConfig& rc, const std::string& task, const std::vector<std::string>& skills,
                  const std::string& decisions, bool ua) {
  std::vector<Scenario> scenarios;
  if (!task.empty()) {
    Scenario s;
    s.id = "cli-1";
    s.nl_task = task;
    s.skills = skills.empty() ? ltl::all_skills() : ltl::parse_skills(skills);
    scenarios.push_back(std::move(s));
  } else if (!rc.corpus.empty()) {
    scenarios = load_corpus(rc.corpus);
  } else {
    throw Error(Errc::InvalidArgument, "give --task or --corpus");
  }
  const auto options = translator_options(rc);
  const auto primary = primary_handle(rc);

  std::ostringstream transcripts;
  bool all_ok = true;
  if (ua) {
    for (const auto& s : scenarios) {
      const auto result = translator::translate_ua(s, primary, options);
      json row = {{"scenario_id", s.id}, {"tokens", result.tokens}, {"truncated", result.truncated}};
      if (result.formula) row["formula"] = result.formula->token_texts();
      if (result.failure) row["failure_reason"] = translator::failure_reason_name(*result.failure);
      all_ok = all_ok && result.formula.has_value();
      transcripts << row.dump() << "\n";
      std::cerr << s.id << ": " << (result.formula ? ltl::join_tokens(result.formula->token_texts()) : "failed") << "\n";
    }
  } else {
    if (rc.model_path.empty()) throw Error(Errc::InvalidArgument, "--calibration-model is required");
    auto model = conformal::CalibrationModel::load(rc.model_path);
    if (std::abs(model.alpha - rc.alpha) > 1e-12) model = model.with_alpha(rc.alpha);
    warn_saturated(model);
    const translator::Translator translator(primary, auxiliary_handle(rc), model, options);
    if (translator.fingerprint() != model.fingerprint) {
      throw Error(Errc::ConfigFingerprintMismatch, "model was calibrated under " + model.fingerprint +
                                                       ", this configuration is " + translator.fingerprint());
    }
    std::unique_ptr<translator::HelpResponder> user;
    if (!decisions.empty()) {
      user = std::make_unique<translator::ScriptedUser>(translator::ScriptedUser::load(decisions));
    } else {
      user = std::make_unique<StdinUser>();
    }
    for (const auto& s : scenarios) {
      translator::TranslationSession session(s.id, s);
      translator::run_session(session, translator, *user);
      transcripts << session.to_json().dump() << "\n";
      const bool ok = std::holds_alternative<translator::Succeeded>(session.status());
      all_ok = all_ok && ok;
      std::cerr << s.id << ": " << session.status_name();
      if (ok) std::cerr << "  " << ltl::join_tokens(std::get<translator::Succeeded>(session.status()).formula.token_texts());
      if (const auto* f = std::get_if<translator::Failed>(&session.status())) {
        std::cerr << " (" << translator::failure_reason_name(f->reason) << (f->detail.empty() ? "" : ": " + f->detail)
                  << ")";
      }
      std::cerr << "\n";
    }
  }
  write_text(rc.out, transcripts.str());
  return all_ok ? 0 : kExitFailed;
}

int cmd_evaluate(const std::string& transcripts, double alpha, const std::string& out) {
  std::ifstream in(transcripts);
  if (!in) throw Error(Errc::Io, "cannot open transcripts " + transcripts);
  std::vector<metrics::SessionOutcome> outcomes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw Error(Errc::InvalidArgument, "transcript line is not JSON");
    outcomes.push_back(metrics::SessionOutcome::from_json(doc));
  }
  write_text(out, metrics::summarize(outcomes, alpha).to_json().dump(2) + "\n");
  return 0;
}

volatile std::sig_atomic_t g_stop = 0;

int cmd_serve(const RunConfig& rc, const std::string& host, int port, const std::string& queue_log) {
  service::ServiceConfig cfg;
  cfg.primary = primary_handle(rc);
  cfg.auxiliary = auxiliary_handle(rc);
  cfg.options = translator_options(rc);
  if (!rc.corpus.empty()) cfg.corpus = load_corpus(rc.corpus);
  if (!rc.model_path.empty()) {
    auto model = conformal::CalibrationModel::load(rc.model_path);
    if (std::abs(model.alpha - rc.alpha) > 1e-12) model = model.with_alpha(rc.alpha);
    warn_saturated(model);
    cfg.model = std::move(model);
  }
  cfg.queue_log = queue_log;
  service::Service svc(std::move(cfg));
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  const int bound = svc.start(host, port);
  std::cerr << "listening on http://" << host << ":" << bound << "\n";
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  svc.stop();
  return 0;
}

int cmd_experiment(const RunConfig& rc, experiment::ExperimentConfig ec, const std::vector<double>& alphas,
                   const std::string& primary_profile, const std::string& aux_profile) {
  ec.alphas = alphas;
  ec.auxiliary = !rc.no_aux;
  const auto options = translator_options(rc);
  ec.engine = options.config;
  ec.prompt_template = options.prompt_template;
  ec.h_max = rc.h_max;
  if (rc.seed) ec.seed = *rc.seed;

  std::vector<Scenario> corpus;
  std::shared_ptr<const gateway::SimulatedProfile> primary, auxiliary;
  if (rc.corpus.empty()) {
    synthetic::SyntheticOptions so;
    so.n_scenarios = ec.calibration_size + ec.test_size;
    auto generated = synthetic::generate(so);
    corpus = std::move(generated.scenarios);
    primary = generated.primary;
    auxiliary = generated.auxiliary;
  } else {
    if (primary_profile.empty()) throw Error(Errc::InvalidArgument, "--primary-profile is required with --corpus");
    corpus = load_corpus(rc.corpus);
    primary = std::make_shared<const gateway::SimulatedProfile>(gateway::SimulatedProfile::load(primary_profile));
    if (!aux_profile.empty()) {
      auxiliary = std::make_shared<const gateway::SimulatedProfile>(gateway::SimulatedProfile::load(aux_profile));
    } else if (ec.auxiliary) {
      throw Error(Errc::InvalidArgument, "--aux-profile is required unless --no-aux");
    }
  }
  const auto result = experiment::run_coverage_experiment(ec, corpus, primary, auxiliary);
  for (const auto& row : result.by_alpha) {
    std::cerr << "alpha " << row.alpha << ": success " << row.mean.success_rate << ", help rate " << row.mean.help_rate
              << ", H_f " << row.mean.h_f << (row.saturated_reps ? "  (saturated quantile in some reps)" : "") << "\n";
  }
  write_text(rc.out, result.to_json().dump(2) + "\n");
  return 0;
}

int cmd_gen_synthetic(const synthetic::SyntheticOptions& so, const std::string& dir) {
  const auto corpus = synthetic::generate(so);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir + ": " + ec.message());
  save_corpus(corpus.scenarios, dir + "/corpus.jsonl");
  corpus.primary->save(dir + "/primary_profile.json");
  corpus.auxiliary->save(dir + "/auxiliary_profile.json");
  std::cerr << "wrote " << corpus.scenarios.size() << " scenarios to " << dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-calibrated natural language to LTL translation"};
  app.require_subcommand(1);
  RunConfig rc;

  auto* calibrate = app.add_subcommand("calibrate", "Label a corpus and build a calibration model");
  std::string records_path;
  add_backend_flags(calibrate, rc);
  add_engine_flags(calibrate, rc);
  calibrate->add_option("--corpus", rc.corpus, "Scenario corpus (JSON Lines)")->required();
  calibrate->add_option("--alpha", rc.alpha, "Miscoverage level")->check(CLI::Range(0.0, 1.0));
  calibrate->add_option("--calibration-model", rc.model_path, "Where to write the model (stdout otherwise)");
  calibrate->add_option("--out", records_path, "Where to write the calibration records (JSON Lines)");

  auto* translate = app.add_subcommand("translate", "Translate scenarios");
  std::string task, decisions;
  std::vector<std::string> skills;
  bool ua = false;
  add_backend_flags(translate, rc);
  add_engine_flags(translate, rc);
  translate->add_option("--corpus", rc.corpus, "Scenario corpus (JSON Lines)");
  translate->add_option("--task", task, "A single task text");
  translate->add_option("--skills", skills, "Skills for --task (default: all)");
  translate->add_option("--alpha", rc.alpha, "Miscoverage level (recomputes q_bar)")->check(CLI::Range(0.0, 1.0));
  translate->add_option("--calibration-model", rc.model_path, "Calibration model JSON");
  translate->add_option("--decisions", decisions, "Scripted help decisions (JSON array); stdin otherwise");
  translate->add_flag("--ua", ua, "Uncertainty-agnostic baseline: argmax at every step, never ask");
  translate->add_option("--out", rc.out, "Transcripts (JSON Lines); stdout otherwise");

  auto* evaluate = app.add_subcommand("evaluate", "Metrics from stored session transcripts");
  std::string transcripts;
  evaluate->add_option("transcripts", transcripts, "Transcripts written by translate")->required();
  evaluate->add_option("--alpha", rc.alpha, "Alpha reported in the summary");
  evaluate->add_option("--out", rc.out, "Summary JSON; stdout otherwise");

  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  std::string host = "127.0.0.1", queue_log;
  int port = 8080;
  add_backend_flags(serve, rc);
  add_engine_flags(serve, rc);
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--corpus", rc.corpus, "Scenarios addressable by id");
  serve->add_option("--calibration-model", rc.model_path, "Calibration model JSON");
  serve->add_option("--alpha", rc.alpha, "Miscoverage level (recomputes q_bar)");
  serve->add_option("--queue-log", queue_log, "Append-only help queue log (JSON Lines)");

  auto* exp = app.add_subcommand("experiment", "Simulated coverage experiment");
  experiment::ExperimentConfig ec;
  std::vector<double> alphas = ec.alphas;
  std::string primary_profile, aux_profile;
  add_engine_flags(exp, rc);
  exp->add_option("--corpus", rc.corpus, "Scenario corpus; a synthetic one is generated otherwise");
  exp->add_option("--primary-profile", primary_profile, "Simulated profile of the primary model");
  exp->add_option("--aux-profile", aux_profile, "Simulated profile of the auxiliary model");
  exp->add_flag("--no-aux", rc.no_aux, "Run without the auxiliary model");
  exp->add_option("--alphas", alphas, "Miscoverage levels")->delimiter(',');
  exp->add_option("--calibration-size", ec.calibration_size);
  exp->add_option("--test-size", ec.test_size);
  exp->add_option("--reps", ec.reps);
  exp->add_option("--out", rc.out, "Result JSON; stdout otherwise");

  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic corpus and simulated profiles");
  synthetic::SyntheticOptions so;
  std::string dir = ".";
  gen->add_option("--n", so.n_scenarios, "Number of scenarios");
  gen->add_option("--seed", so.seed);
  gen->add_option("--out-dir", dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*calibrate) return cmd_calibrate(rc, records_path);
    if (*translate) return cmd_translate(rc, task, skills, decisions, ua);
    if (*evaluate) return cmd_evaluate(transcripts, rc.alpha, rc.out);
    if (*serve) return cmd_serve(rc, host, port, queue_log);
    if (*exp) return cmd_experiment(rc, ec, alphas, primary_profile, aux_profile);
    if (*gen) return cmd_gen_synthetic(so, dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::BackendUnavailable ? kExitFailed : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}

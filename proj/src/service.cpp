#include "nl2ltl/service.hpp"

#include <httplib.h>

#include <algorithm>

#include "nl2ltl/error.hpp"

namespace nl2ltl::service {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Interactive labeling

calibration::LabelResult QueueLabeler::label(const Scenario& scenario, const std::vector<std::string>& prefix, int k,
                                             const response::ResponseDistribution& primary,
                                             const response::ResponseDistribution* auxiliary) {
  if (!always_ask_ && scenario.ground_truth_tokens) return corpus_.label(scenario, prefix, k, primary, auxiliary);

  translator::HelpRequest request;
  request.session_id = owner_ + "/" + scenario.id;
  request.k = k;
  request.task = scenario.nl_task;
  request.partial = prefix;
  for (const auto& r : calibration::shared_responses(primary, auxiliary)) {
    request.candidates.push_back({r, primary.frequency_of(r)});
  }
  const auto id = queue_.enqueue(request.session_id, request, HelpMode::CalibrationLabeling, scenario.skills);
  const auto decision = queue_.wait(id);
  switch (decision.kind) {
    case Decision::Kind::Select: {
      calibration::LabelResult r;
      r.response = decision.response;
      r.primary_frequency = primary.frequency_of(decision.response);
      if (auxiliary) r.auxiliary_frequency = auxiliary->frequency_of(decision.response);
      r.source = calibration::TruthSource::FromShared;
      return r;
    }
    case Decision::Kind::TypeIn:
      return calibration::typed_label(decision.response, auxiliary != nullptr);
    case Decision::Kind::Halt:
      break;
  }
  throw Error(Errc::InvalidArgument, "operator halted labeling of " + scenario.id);
}

// ---------------------------------------------------------------------------

int http_status(Errc code) {
  switch (code) {
    case Errc::UnknownEntry:
    case Errc::UnknownSession:
      return 404;
    case Errc::AlreadyResolved:
    case Errc::DuplicateForSession:
    case Errc::NotAwaitingHelp:
    case Errc::ConfigFingerprintMismatch:
    case Errc::MixedFingerprints:
      return 409;
    case Errc::BackendUnavailable:
      return 503;
    case Errc::Io:
      return 500;
    default:
      return 400;
  }
}

struct Service::SessionSlot {
  std::string id;
  Scenario scenario;
  mutable std::mutex mutex;
  json snapshot;
  std::optional<metrics::SessionOutcome> outcome;
};

struct Service::JobSlot {
  std::string id;
  std::vector<Scenario> scenarios;
  bool interactive = false;
  std::optional<double> alpha;
  bool install = false;

  mutable std::mutex mutex;
  std::string status = "Running";
  std::string error;
  std::vector<calibration::CalibrationRecord> records;
  std::optional<conformal::CalibrationModel> model;
};

Service::Service(ServiceConfig config)
    : config_(std::move(config)), queue_(config_.queue_log), server_(std::make_unique<httplib::Server>()) {
  if (config_.model) {
    translator_ = std::make_shared<const translator::Translator>(config_.primary, config_.auxiliary, *config_.model,
                                                                  config_.options);
  }
  install_routes();
}

Service::~Service() { stop(); }

int Service::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(Errc::Io, "cannot bind " + host + ":" + std::to_string(port));
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void Service::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) throw Error(Errc::Io, "cannot listen on " + host + ":" + std::to_string(port));
}

void Service::stop() {
  if (stopping_.exchange(true)) return;
  queue_.shutdown();
  server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
  join_workers();
}

void Service::join_workers() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    workers.swap(workers_);
  }
  for (auto& w : workers) w.join();
}

// ---------------------------------------------------------------------------
// Sessions

std::string Service::create_session(const Scenario& scenario) {
  std::lock_guard lock(mutex_);
  if (stopping_) throw Error(Errc::Io, "service is stopping");
  if (!translator_) throw Error(Errc::InvalidArgument, "no calibration model loaded");
  if (translator_->fingerprint() != translator_->model().fingerprint) {
    throw Error(Errc::ConfigFingerprintMismatch, "model " + translator_->model().fingerprint + ", runtime " +
                                                     translator_->fingerprint());
  }
  auto slot = std::make_shared<SessionSlot>();
  slot->id = "s" + std::to_string(next_session_++);
  slot->scenario = scenario;
  slot->snapshot = translator::TranslationSession(slot->id, scenario).to_json();
  sessions_[slot->id] = slot;
  workers_.emplace_back([this, slot, t = translator_] { run_session(slot, t); });
  return slot->id;
}

void Service::run_session(std::shared_ptr<SessionSlot> slot, std::shared_ptr<const translator::Translator> translator) {
  translator::TranslationSession session(slot->id, slot->scenario);
  std::vector<json> help_log;
  std::string last_error;
  auto publish = [&](const std::optional<std::string>& help_entry = std::nullopt) {
    auto doc = session.to_json();
    doc["help_log"] = help_log;
    if (help_entry) doc["help_entry"] = *help_entry;
    if (!last_error.empty()) doc["last_error"] = last_error;
    std::lock_guard lock(slot->mutex);
    slot->snapshot = std::move(doc);
    if (session.terminal()) slot->outcome = metrics::SessionOutcome::from_session(session);
  };

  int retries = 0;
  while (!stopping_ && !session.terminal()) {
    if (session.running()) {
      try {
        translator->advance_step(session);
        retries = 0;
        last_error.clear();
      } catch (const Error& e) {
        last_error = e.what();
        if (e.code() != Errc::BackendUnavailable || ++retries > config_.backend_retries) {
          publish();
          return;
        }
        publish();
        std::this_thread::sleep_for(config_.retry_delay * retries);
        continue;
      }
      publish();
      continue;
    }
    const auto request = std::get<translator::AwaitingHelp>(session.status()).request;
    std::string entry;
    Decision decision;
    try {
      entry = queue_.enqueue(session.id(), request, HelpMode::TestTimeHelp, session.scenario().skills);
      publish(entry);
      decision = queue_.wait(entry);
    } catch (const Error& e) {
      last_error = e.what();
      publish();
      return;
    }
    help_log.push_back({{"entry", entry}, {"k", request.k}, {"decision", decision.to_json()}});
    translator->apply_help_choice(session, decision.kind == Decision::Kind::Select
                                               ? translator::HelpDecision::select(decision.response)
                                               : translator::HelpDecision::halt());
    publish();
  }
}

json Service::session_json(const std::string& id) const {
  std::shared_ptr<SessionSlot> slot;
  {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(Errc::UnknownSession, id);
    slot = it->second;
  }
  std::lock_guard lock(slot->mutex);
  return slot->snapshot;
}

json Service::sessions_json() const {
  std::vector<std::shared_ptr<SessionSlot>> slots;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, s] : sessions_) slots.push_back(s);
  }
  json out = json::array();
  for (const auto& s : slots) {
    std::lock_guard lock(s->mutex);
    json row = {{"id", s->id},
                {"scenario_id", s->scenario.id},
                {"status", s->snapshot.at("status")},
                {"partial_tokens", s->snapshot.at("partial_tokens")}};
    if (s->snapshot.contains("formula")) row["formula"] = s->snapshot["formula"];
    if (s->snapshot.contains("failure_reason")) row["failure_reason"] = s->snapshot["failure_reason"];
    out.push_back(std::move(row));
  }
  return out;
}

metrics::MetricsSummary Service::metrics() const {
  std::vector<metrics::SessionOutcome> outcomes;
  double alpha = 0.0;
  {
    std::lock_guard lock(mutex_);
    if (translator_) alpha = translator_->model().alpha;
    for (const auto& [id, s] : sessions_) {
      std::lock_guard slot_lock(s->mutex);
      if (s->outcome) outcomes.push_back(*s->outcome);
    }
  }
  return metrics::summarize(outcomes, alpha);
}

// ---------------------------------------------------------------------------
// Calibration jobs

std::string Service::create_calibration_job(std::vector<Scenario> scenarios, bool interactive,
                                            std::optional<double> alpha, bool install) {
  if (scenarios.empty()) throw Error(Errc::InvalidArgument, "calibration job has no scenarios");
  if (install && !alpha) throw Error(Errc::InvalidArgument, "install requires alpha");
  std::lock_guard lock(mutex_);
  if (stopping_) throw Error(Errc::Io, "service is stopping");
  auto job = std::make_shared<JobSlot>();
  job->id = "c" + std::to_string(next_job_++);
  job->scenarios = std::move(scenarios);
  job->interactive = interactive;
  job->alpha = alpha;
  job->install = install;
  jobs_[job->id] = job;
  workers_.emplace_back([this, job] { run_job(job); });
  return job->id;
}

void Service::run_job(std::shared_ptr<JobSlot> job) {
  calibration::CalibrationSetup setup{config_.primary,
                                      config_.auxiliary,
                                      config_.options.config,
                                      config_.options.prompt_template,
                                      config_.options.similarity,
                                      config_.options.h_max};
  QueueLabeler labeler(queue_, job->id, job->interactive);
  try {
    for (const auto& scenario : job->scenarios) {
      if (stopping_) throw Error(Errc::Io, "service stopped");
      auto record = calibration::label_scenario(scenario, setup, labeler);
      std::lock_guard lock(job->mutex);
      job->records.push_back(std::move(record));
    }
    std::optional<conformal::CalibrationModel> model;
    if (job->alpha) {
      std::lock_guard lock(job->mutex);
      model = calibration::build_calibration_model(job->records, *job->alpha);
    }
    if (model && job->install) {
      auto t = std::make_shared<const translator::Translator>(config_.primary, config_.auxiliary, *model,
                                                              config_.options);
      std::lock_guard lock(mutex_);
      translator_ = std::move(t);
    }
    std::lock_guard lock(job->mutex);
    job->model = std::move(model);
    job->status = "Succeeded";
  } catch (const Error& e) {
    std::lock_guard lock(job->mutex);
    job->status = "Failed";
    job->error = e.what();
  }
}

json Service::job_json(const std::string& id) const {
  std::shared_ptr<JobSlot> job;
  {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw Error(Errc::UnknownEntry, "calibration job " + id);
    job = it->second;
  }
  std::lock_guard lock(job->mutex);
  json records = json::array();
  for (const auto& r : job->records) records.push_back(r.to_json());
  json out = {{"id", job->id},
              {"status", job->status},
              {"interactive", job->interactive},
              {"installed", job->install && job->model.has_value()},
              {"n_scenarios", job->scenarios.size()},
              {"n_labeled", job->records.size()},
              {"records", records}};
  if (job->model) out["model"] = job->model->to_json();
  if (!job->error.empty()) out["error"] = job->error;
  return out;
}

// ---------------------------------------------------------------------------
// HTTP

Scenario Service::scenario_from_request(const json& body) const {
  if (body.contains("scenario")) return Scenario::from_json(body["scenario"]);
  if (body.contains("scenario_id")) {
    const auto id = body["scenario_id"].get<std::string>();
    for (const auto& s : config_.corpus) {
      if (s.id == id) return s;
    }
    throw Error(Errc::UnknownEntry, "scenario " + id + " is not in the corpus");
  }
  if (body.contains("nl_task")) {
    auto doc = body;
    if (!doc.contains("id")) doc["id"] = "adhoc-" + std::to_string(fnv1a64(body.dump()));
    if (!doc.contains("skills")) doc["skills"] = ltl::skill_names(ltl::all_skills());
    return Scenario::from_json(doc);
  }
  throw Error(Errc::InvalidArgument, "expected \"scenario\", \"scenario_id\" or \"nl_task\"");
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto doc = json::parse(req.body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(Errc::InvalidArgument, "request body must be a JSON object");
  return doc;
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_json(res, http_status(e.code()), {{"error", errc_name(e.code())}, {"message", e.what()}});
    } catch (const json::exception& e) {
      send_json(res, 400, {{"error", "InvalidArgument"}, {"message", e.what()}});
    }
  };
}

}  // namespace

void Service::install_routes() {
  auto& s = *server_;
  s.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"ok", true}}); }));

  s.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto id = create_session(scenario_from_request(parse_body(req)));
           send_json(res, 201, session_json(id));
         }));
  s.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"sessions", sessions_json()}}); }));
  s.Get(R"(/sessions/([^/]+))",
        guarded([this](const httplib::Request& req, httplib::Response& res) { send_json(res, 200, session_json(req.matches[1])); }));

  s.Get("/help/pending", guarded([this](const httplib::Request& req, httplib::Response& res) {
          long wait_ms = 0;
          if (req.has_param("wait")) {
            try {
              wait_ms = std::clamp(std::stol(req.get_param_value("wait")), 0L, 30000L);
            } catch (const std::exception&) {
              throw Error(Errc::InvalidArgument, "wait must be milliseconds");
            }
          }
          const auto entries = wait_ms > 0 ? queue_.wait_pending(std::chrono::milliseconds(wait_ms)) : queue_.pending();
          json out = json::array();
          for (const auto& e : entries) out.push_back(e.to_json());
          send_json(res, 200, {{"entries", out}});
        }));
  s.Post(R"(/help/([^/]+)/resolve)", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const std::string id = req.matches[1];
           queue_.resolve(id, Decision::from_json(parse_body(req)));
           send_json(res, 200, queue_.get(id)->to_json());
         }));

  s.Post("/calibration/jobs", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto body = parse_body(req);
           std::vector<Scenario> scenarios;
           if (body.contains("scenarios")) {
             for (const auto& doc : body["scenarios"]) scenarios.push_back(Scenario::from_json(doc));
           } else if (body.contains("scenario_ids")) {
             for (const auto& id : body["scenario_ids"]) scenarios.push_back(scenario_from_request({{"scenario_id", id}}));
           } else {
             scenarios = config_.corpus;
           }
           std::optional<double> alpha;
           if (body.contains("alpha")) alpha = body["alpha"].get<double>();
           const auto id = create_calibration_job(std::move(scenarios), body.value("interactive", false), alpha,
                                                  body.value("install", false));
           send_json(res, 202, job_json(id));
         }));
  s.Get(R"(/calibration/jobs/([^/]+))",
        guarded([this](const httplib::Request& req, httplib::Response& res) { send_json(res, 200, job_json(req.matches[1])); }));

  s.Get("/metrics", guarded([this](const httplib::Request&, httplib::Response& res) { send_json(res, 200, metrics().to_json()); }));
}

}  // namespace nl2ltl::service

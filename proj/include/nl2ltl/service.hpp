#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "nl2ltl/calibration.hpp"
#include "nl2ltl/help_queue.hpp"
#include "nl2ltl/metrics.hpp"
#include "nl2ltl/translator.hpp"

namespace httplib {
class Server;
}

namespace nl2ltl::service {

/// Labels calibration steps through the help queue. Scenarios with
/// annotated formulas are labeled from the corpus unless `always_ask`.
class QueueLabeler final : public calibration::Labeler {
 public:
  QueueLabeler(HelpQueue& queue, std::string owner, bool always_ask)
      : queue_(queue), owner_(std::move(owner)), always_ask_(always_ask) {}

  /// Throws InvalidArgument when the operator halts the job.
  calibration::LabelResult label(const Scenario& scenario, const std::vector<std::string>& prefix, int k,
                                 const response::ResponseDistribution& primary,
                                 const response::ResponseDistribution* auxiliary) override;

 private:
  HelpQueue& queue_;
  std::string owner_;
  bool always_ask_;
  calibration::CorpusLabeler corpus_;
};

struct ServiceConfig {
  gateway::ModelHandle primary;
  std::optional<gateway::ModelHandle> auxiliary;
  std::optional<conformal::CalibrationModel> model;  // sessions are refused until one is present
  translator::TranslatorOptions options;
  std::vector<Scenario> corpus;       // addressable by scenario_id
  std::string queue_log;              // empty: no persistence
  int backend_retries = 3;
  std::chrono::milliseconds retry_delay{500};
};

/// REST facade over sessions, the help queue and calibration jobs.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread; returns the bound port
  /// (pass 0 for an ephemeral one). Throws Io when binding fails.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

  // Operations behind the endpoints, usable without HTTP.
  std::string create_session(const Scenario& scenario);
  nlohmann::json session_json(const std::string& id) const;
  nlohmann::json sessions_json() const;
  std::string create_calibration_job(std::vector<Scenario> scenarios, bool interactive, std::optional<double> alpha,
                                     bool install);
  nlohmann::json job_json(const std::string& id) const;
  metrics::MetricsSummary metrics() const;
  /// Blocks until every started session and job has finished.
  void join_workers();

  HelpQueue& queue() noexcept { return queue_; }

 private:
  struct SessionSlot;
  struct JobSlot;

  void run_session(std::shared_ptr<SessionSlot> slot, std::shared_ptr<const translator::Translator> translator);
  void run_job(std::shared_ptr<JobSlot> job);
  void install_routes();
  Scenario scenario_from_request(const nlohmann::json& body) const;

  ServiceConfig config_;
  HelpQueue queue_;
  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;

  mutable std::mutex mutex_;
  std::shared_ptr<const translator::Translator> translator_;
  std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
  std::map<std::string, std::shared_ptr<JobSlot>> jobs_;
  std::vector<std::thread> workers_;
  std::uint64_t next_session_ = 1;
  std::uint64_t next_job_ = 1;
  std::atomic<bool> stopping_{false};
};

/// HTTP status used for an error code.
int http_status(Errc code);

}  // namespace nl2ltl::service

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nl2ltl/ap.hpp"
#include "nl2ltl/translator.hpp"

namespace nl2ltl::service {

enum class HelpMode { TestTimeHelp, CalibrationLabeling };

std::string help_mode_name(HelpMode mode);

struct Decision {
  enum class Kind { Select, TypeIn, Halt };
  Kind kind = Kind::Halt;
  std::string response;

  static Decision select(std::string r) { return {Kind::Select, std::move(r)}; }
  static Decision type_in(std::string r) { return {Kind::TypeIn, std::move(r)}; }
  static Decision halt() { return {Kind::Halt, {}}; }

  nlohmann::json to_json() const;
  /// {"decision": "select"|"type_in"|"halt", "response": ...}
  static Decision from_json(const nlohmann::json& doc);
};

struct HelpQueueEntry {
  std::string id;
  std::string owner;  // session id or calibration job id plus scenario
  HelpMode mode = HelpMode::TestTimeHelp;
  translator::HelpRequest request;
  ltl::SkillSet skills;  // for checking typed responses
  std::string enqueued_at;
  std::optional<Decision> resolved;

  bool free_text_allowed() const noexcept { return mode == HelpMode::CalibrationLabeling; }
  nlohmann::json to_json() const;
};

/// Pending human decisions. Each entry is resolved exactly once; the
/// workflow that enqueued it blocks in wait() until then.
class HelpQueue {
 public:
  /// With a non-empty path every enqueue and resolution is appended to it
  /// as one JSON line.
  explicit HelpQueue(std::string persist_path = {});
  ~HelpQueue();

  HelpQueue(const HelpQueue&) = delete;
  HelpQueue& operator=(const HelpQueue&) = delete;

  /// Throws DuplicateForSession when (owner, step) already has an entry.
  std::string enqueue(const std::string& owner, translator::HelpRequest request, HelpMode mode,
                      ltl::SkillSet skills);

  /// Throws UnknownEntry, AlreadyResolved, TypeInNotAllowed,
  /// InvalidTypedResponse or UnknownCandidate.
  void resolve(const std::string& id, const Decision& decision);

  /// Blocks until the entry is resolved. Throws Io after shutdown().
  Decision wait(const std::string& id);

  std::vector<HelpQueueEntry> pending() const;
  /// Waits up to `timeout` for at least one pending entry, then returns
  /// whatever is pending.
  std::vector<HelpQueueEntry> wait_pending(std::chrono::milliseconds timeout) const;
  std::optional<HelpQueueEntry> get(const std::string& id) const;
  std::vector<HelpQueueEntry> entries() const;

  /// Wakes every waiter; later waits throw.
  void shutdown();

 private:
  void persist(const nlohmann::json& line);

  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::map<std::string, HelpQueueEntry> entries_;
  std::map<std::pair<std::string, int>, std::string> by_owner_;
  std::uint64_t next_id_ = 1;
  bool closed_ = false;
  std::ofstream log_;
};

/// Whether `text` is acceptable as a typed-in response: a canonical
/// operator, parenthesis, the end marker, or a valid AP for `skills`.
bool valid_typed_response(const std::string& text, const ltl::SkillSet& skills);

std::string utc_timestamp();

}  // namespace nl2ltl::service

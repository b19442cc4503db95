#include "nl2ltl/help_queue.hpp"

#include <algorithm>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "nl2ltl/error.hpp"
#include "nl2ltl/ltl.hpp"

namespace nl2ltl::service {

using nlohmann::json;

std::string help_mode_name(HelpMode mode) {
  return mode == HelpMode::TestTimeHelp ? "TestTimeHelp" : "CalibrationLabeling";
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
  return out.str();
}

json Decision::to_json() const {
  switch (kind) {
    case Kind::Select: return {{"decision", "select"}, {"response", response}};
    case Kind::TypeIn: return {{"decision", "type_in"}, {"response", response}};
    case Kind::Halt: break;
  }
  return {{"decision", "halt"}};
}

Decision Decision::from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("decision") || !doc["decision"].is_string()) {
    throw Error(Errc::InvalidArgument, "decision must be an object with a \"decision\" field");
  }
  const auto kind = doc["decision"].get<std::string>();
  if (kind == "halt") return halt();
  if (kind != "select" && kind != "type_in") throw Error(Errc::InvalidArgument, "unknown decision '" + kind + "'");
  if (!doc.contains("response") || !doc["response"].is_string()) {
    throw Error(Errc::InvalidArgument, kind + " needs a string \"response\"");
  }
  auto text = doc["response"].get<std::string>();
  return kind == "select" ? select(std::move(text)) : type_in(std::move(text));
}

json HelpQueueEntry::to_json() const {
  json out = {{"id", id},
              {"owner", owner},
              {"mode", help_mode_name(mode)},
              {"free_text_allowed", free_text_allowed()},
              {"request", request.to_json()},
              {"skills", ltl::skill_names(skills)},
              {"enqueued_at", enqueued_at}};
  out["resolved"] = resolved ? resolved->to_json() : json(nullptr);
  return out;
}

bool valid_typed_response(const std::string& text, const ltl::SkillSet& skills) {
  const auto canonical = ltl::canonical_symbol(text);
  if (canonical == ltl::kEndMarker || canonical == "(" || canonical == ")" || ltl::is_operator(canonical)) return true;
  return ltl::validate_ap(canonical, skills).valid();
}

HelpQueue::HelpQueue(std::string persist_path) {
  if (persist_path.empty()) return;
  {
    // Keep ids unique across restarts that share one log file.
    std::ifstream in(persist_path);
    std::string line;
    while (std::getline(in, line)) {
      const auto doc = json::parse(line, nullptr, false);
      if (doc.is_discarded() || doc.value("event", "") != "enqueue") continue;
      const auto id = doc["entry"].value("id", "");
      if (id.rfind("h", 0) == 0) {
        try {
          next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(id.substr(1)) + 1);
        } catch (const std::exception&) {
        }
      }
    }
  }
  log_.open(persist_path, std::ios::app);
  if (!log_) throw Error(Errc::Io, "cannot open help queue log " + persist_path);
}

HelpQueue::~HelpQueue() { shutdown(); }

void HelpQueue::persist(const json& line) {
  if (!log_.is_open()) return;
  log_ << line.dump() << '\n';
  log_.flush();
}

std::string HelpQueue::enqueue(const std::string& owner, translator::HelpRequest request, HelpMode mode,
                               ltl::SkillSet skills) {
  std::lock_guard lock(mutex_);
  if (closed_) throw Error(Errc::Io, "help queue is shut down");
  const auto key = std::make_pair(owner, request.k);
  if (by_owner_.count(key)) {
    throw Error(Errc::DuplicateForSession, owner + " already has a help entry for step " + std::to_string(request.k));
  }
  HelpQueueEntry entry;
  entry.id = "h" + std::to_string(next_id_++);
  entry.owner = owner;
  entry.mode = mode;
  entry.request = std::move(request);
  entry.skills = std::move(skills);
  entry.enqueued_at = utc_timestamp();
  persist({{"event", "enqueue"}, {"entry", entry.to_json()}});
  by_owner_[key] = entry.id;
  const auto id = entry.id;
  entries_.emplace(id, std::move(entry));
  changed_.notify_all();
  return id;
}

void HelpQueue::resolve(const std::string& id, const Decision& decision) {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(id);
  if (it == entries_.end()) throw Error(Errc::UnknownEntry, id);
  auto& entry = it->second;
  if (entry.resolved) throw Error(Errc::AlreadyResolved, id);

  switch (decision.kind) {
    case Decision::Kind::Select: {
      const auto& c = entry.request.candidates;
      const bool offered = std::any_of(c.begin(), c.end(), [&](const auto& m) { return m.response == decision.response; });
      if (!offered) throw Error(Errc::UnknownCandidate, "'" + decision.response + "' was not offered in " + id);
      break;
    }
    case Decision::Kind::TypeIn:
      if (!entry.free_text_allowed()) throw Error(Errc::TypeInNotAllowed, id + " accepts only offered candidates");
      if (!valid_typed_response(decision.response, entry.skills)) {
        throw Error(Errc::InvalidTypedResponse, "'" + decision.response + "' is neither an operator nor a valid AP");
      }
      break;
    case Decision::Kind::Halt:
      break;
  }
  entry.resolved = decision;
  if (entry.resolved->kind == Decision::Kind::TypeIn) {
    entry.resolved->response = ltl::canonical_symbol(entry.resolved->response);
  }
  persist({{"event", "resolve"}, {"id", id}, {"at", utc_timestamp()}, {"decision", entry.resolved->to_json()}});
  changed_.notify_all();
}

Decision HelpQueue::wait(const std::string& id) {
  std::unique_lock lock(mutex_);
  const auto it = entries_.find(id);
  if (it == entries_.end()) throw Error(Errc::UnknownEntry, id);
  changed_.wait(lock, [&] { return closed_ || it->second.resolved.has_value(); });
  if (!it->second.resolved) throw Error(Errc::Io, "help queue shut down while waiting for " + id);
  return *it->second.resolved;
}

std::vector<HelpQueueEntry> HelpQueue::pending() const {
  std::lock_guard lock(mutex_);
  std::vector<HelpQueueEntry> out;
  for (const auto& [id, e] : entries_) {
    if (!e.resolved) out.push_back(e);
  }
  // Oldest first: ids grow with enqueue order.
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::make_pair(a.id.size(), a.id) < std::make_pair(b.id.size(), b.id);
  });
  return out;
}

std::vector<HelpQueueEntry> HelpQueue::wait_pending(std::chrono::milliseconds timeout) const {
  {
    std::unique_lock lock(mutex_);
    changed_.wait_for(lock, timeout, [&] {
      return closed_ || std::any_of(entries_.begin(), entries_.end(), [](const auto& kv) { return !kv.second.resolved; });
    });
  }
  return pending();
}

std::optional<HelpQueueEntry> HelpQueue::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<HelpQueueEntry> HelpQueue::entries() const {
  std::lock_guard lock(mutex_);
  std::vector<HelpQueueEntry> out;
  for (const auto& [id, e] : entries_) out.push_back(e);
  return out;
}

void HelpQueue::shutdown() {
  std::lock_guard lock(mutex_);
  closed_ = true;
  changed_.notify_all();
}

}  // namespace nl2ltl::service

#include <algorithm>
#include <tuple>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "nl2ltl/error.hpp"
#include "nl2ltl/gateway.hpp"

namespace nl2ltl::gateway {

using nlohmann::json;

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

void SimulatedProfile::add(ProfileEntry entry) {
  double total = 0.0;
  for (const auto& [response, p] : entry.dist) {
    if (!(p >= 0.0)) throw Error(Errc::InvalidArgument, "negative probability for '" + response + "'");
    total += p;
  }
  if (entry.dist.empty() || std::fabs(total - 1.0) > 1e-9) {
    throw Error(Errc::InvalidArgument, "profile distribution for task '" + entry.task + "' step " +
                                           std::to_string(entry.k) + " sums to " + std::to_string(total));
  }
  const auto key = prompt_key(entry.task, entry.status, entry.k);
  entries_.insert_or_assign(key, std::move(entry));
}

const ProfileEntry* SimulatedProfile::find(std::uint64_t key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

SimulatedProfile SimulatedProfile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open profile " + path);
  try {
    const auto doc = json::parse(in);
    SimulatedProfile profile(doc.value("seed", std::uint64_t{0}));
    for (const auto& e : doc.at("entries")) {
      ProfileEntry entry;
      const auto& fields = e.at("key_fields");
      entry.task = fields.at("task").get<std::string>();
      entry.status = fields.at("status").get<std::vector<std::string>>();
      entry.k = fields.at("k").get<int>();
      for (const auto& pair : e.at("dist")) {
        entry.dist.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<double>());
      }
      if (e.contains("truth") && !e["truth"].is_null()) entry.truth = e["truth"].get<std::string>();
      profile.add(std::move(entry));
    }
    return profile;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, "profile " + path + ": " + e.what());
  }
}

void SimulatedProfile::save(const std::string& path) const {
  // Stable order so saved files diff cleanly.
  std::vector<const ProfileEntry*> ordered;
  for (const auto& [key, entry] : entries_) ordered.push_back(&entry);
  std::sort(ordered.begin(), ordered.end(), [](const ProfileEntry* a, const ProfileEntry* b) {
    return std::tie(a->task, a->k, a->status) < std::tie(b->task, b->k, b->status);
  });

  json entries = json::array();
  for (const auto* entry : ordered) {
    json dist = json::array();
    for (const auto& [response, p] : entry->dist) dist.push_back({response, p});
    entries.push_back({{"key_fields", {{"task", entry->task}, {"status", entry->status}, {"k", entry->k}}},
                       {"dist", dist},
                       {"truth", entry->truth ? json(*entry->truth) : json(nullptr)}});
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write profile " + path);
  out << json{{"seed", seed_}, {"entries", entries}}.dump() << "\n";
}

SimulatedBackend::SimulatedBackend(std::shared_ptr<const SimulatedProfile> profile)
    : SimulatedBackend(profile, profile->seed()) {}

SimulatedBackend::SimulatedBackend(std::shared_ptr<const SimulatedProfile> profile, std::uint64_t seed)
    : profile_(std::move(profile)), seed_(seed) {}

std::string SimulatedBackend::sample(const PromptContext& prompt) {
  const auto key = prompt_key(prompt);
  const auto* entry = profile_->find(key);
  if (!entry) {
    throw Error(Errc::ProfileMiss, "no profile entry for step " + std::to_string(prompt.k) + " of '" +
                                       prompt.task + "' after [" + prompt.status_text() + "]");
  }
  std::uint64_t draw;
  {
    std::lock_guard lock(mutex_);
    draw = counters_[key]++;
  }
  const double u = unit_interval(mix64(mix64(seed_ ^ mix64(key)) + draw));
  double cumulative = 0.0;
  for (const auto& [response, p] : entry->dist) {
    cumulative += p;
    if (u < cumulative) return response;
  }
  // Rounding left u above the last cumulative sum; take the last nonzero entry.
  for (auto it = entry->dist.rbegin(); it != entry->dist.rend(); ++it) {
    if (it->second > 0.0) return it->first;
  }
  return entry->dist.back().first;
}

std::string SimulatedBackend::describe() const {
  return "simulated(" + std::to_string(profile_->size()) + " entries, seed " + std::to_string(seed_) + ")";
}

}  // namespace nl2ltl::gateway

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nl2ltl/prompt.hpp"

namespace nl2ltl::gateway {

/// A language model that answers one prompt with one raw string.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  /// Throws Error{BackendUnavailable} on transport failure and
  /// Error{ProfileMiss} when a simulated profile has no entry.
  virtual std::string sample(const PromptContext& prompt) = 0;

  /// Whether the m samples of one step may be drawn concurrently.
  virtual bool parallel_sampling() const { return false; }

  virtual std::string describe() const = 0;
};

enum class ModelRole { Primary, Auxiliary };

struct ModelHandle {
  std::string id;
  ModelRole role = ModelRole::Primary;
  std::shared_ptr<ModelBackend> backend;
};

inline std::string sample_completion(const ModelHandle& model, const PromptContext& prompt) {
  return model.backend->sample(prompt);
}

// ---------------------------------------------------------------------------
// Simulated backend

struct ProfileEntry {
  std::string task;
  std::vector<std::string> status;
  int k = 1;
  std::vector<std::pair<std::string, double>> dist;
  std::optional<std::string> truth;
};

/// Categorical response tables keyed by prompt_key().
class SimulatedProfile {
 public:
  SimulatedProfile() = default;
  explicit SimulatedProfile(std::uint64_t seed) : seed_(seed) {}

  /// Adds or replaces the entry for its key. Throws InvalidArgument when the
  /// probabilities do not sum to 1 within 1e-9 or are negative.
  void add(ProfileEntry entry);

  const ProfileEntry* find(std::uint64_t key) const;
  std::uint64_t seed() const noexcept { return seed_; }
  void set_seed(std::uint64_t seed) noexcept { seed_ = seed; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::unordered_map<std::uint64_t, ProfileEntry>& entries() const noexcept { return entries_; }

  static SimulatedProfile load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::uint64_t seed_ = 0;
  std::unordered_map<std::uint64_t, ProfileEntry> entries_;
};

/// Replays a profile. Draw i for a key is a pure function of
/// (seed, key, i), so identical prompt sequences give identical responses.
class SimulatedBackend final : public ModelBackend {
 public:
  explicit SimulatedBackend(std::shared_ptr<const SimulatedProfile> profile);
  SimulatedBackend(std::shared_ptr<const SimulatedProfile> profile, std::uint64_t seed);

  std::string sample(const PromptContext& prompt) override;
  std::string describe() const override;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::shared_ptr<const SimulatedProfile> profile_;
  std::uint64_t seed_;
  std::mutex mutex_;
  std::unordered_map<std::uint64_t, std::uint64_t> counters_;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;
/// Uniform double in [0, 1) from the top 53 bits of a 64-bit word.
double unit_interval(std::uint64_t bits) noexcept;

// ---------------------------------------------------------------------------
// Remote backend (OpenAI-compatible chat completions)

struct RemoteConfig {
  std::string endpoint;   // base URL, e.g. https://api.openai.com/v1
  std::string model;
  std::string token_env;  // environment variable holding the bearer token
  double temperature = 1.0;
  int timeout_seconds = 60;
};

class RemoteBackend final : public ModelBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  std::string sample(const PromptContext& prompt) override;
  bool parallel_sampling() const override { return true; }
  std::string describe() const override;

  const RemoteConfig& config() const noexcept { return config_; }

 private:
  RemoteConfig config_;
};

/// Parses "simulated:<profile.json>" or "remote:<endpoint>[#model]".
/// Remote token variable defaults to NL2LTL_API_KEY.
std::shared_ptr<ModelBackend> make_backend(const std::string& spec);

// ---------------------------------------------------------------------------
// Embeddings

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(const std::string& text) = 0;
  virtual std::size_t dimension() const = 0;
};

/// Hashed character-trigram counts over "#text#". Used when no embedding
/// service is configured.
class TrigramEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDimension = 4096;

  std::vector<double> embed(const std::string& text) override;
  std::size_t dimension() const override { return kDimension; }
};

/// OpenAI-compatible /embeddings client.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(RemoteConfig config) : config_(std::move(config)) {}

  std::vector<double> embed(const std::string& text) override;
  std::size_t dimension() const override { return dimension_; }

 private:
  RemoteConfig config_;
  std::size_t dimension_ = 0;
};

/// Memoizes another embedder; safe for concurrent use.
class CachingEmbedder final : public Embedder {
 public:
  explicit CachingEmbedder(std::shared_ptr<Embedder> inner) : inner_(std::move(inner)) {}

  std::vector<double> embed(const std::string& text) override;
  std::size_t dimension() const override { return inner_->dimension(); }

 private:
  std::shared_ptr<Embedder> inner_;
  std::mutex mutex_;
  std::map<std::string, std::vector<double>> cache_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace nl2ltl::gateway

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nl2ltl/ap.hpp"
#include "nl2ltl/gateway.hpp"
#include "nl2ltl/rational.hpp"

namespace nl2ltl::response {

/// Sampling parameters; must match between calibration and test.
struct EngineConfig {
  int m = 10;
  double zeta = 0.75;

  /// Throws InvalidArgument unless m >= 2 and 0 < zeta < 1.
  void validate() const;
};

struct ResponseEntry {
  std::string response;
  int count = 0;
  Rational frequency;  // count / m_k

  friend bool operator==(const ResponseEntry&, const ResponseEntry&) = default;
};

/// Unique responses of one step with their frequency scores. Entries are
/// sorted by descending frequency, then lexicographically.
struct ResponseDistribution {
  std::vector<ResponseEntry> entries;
  int m_k = 0;
  std::vector<std::string> raw;

  bool empty() const noexcept { return entries.empty(); }
  const ResponseEntry* find(std::string_view response) const;
  /// Frequency of `response`, 0 when it was not generated.
  Rational frequency_of(std::string_view response) const;

  friend bool operator==(const ResponseDistribution&, const ResponseDistribution&) = default;
};

using SimilarityFn = std::function<double(const std::string&, const std::string&)>;

/// Trims and collapses internal whitespace runs to one space.
std::string normalize_response(std::string_view raw);

/// Normalizes, maps glyph aliases to ASCII, and keeps only responses that
/// are a single operator, parenthesis, end marker, or valid AP.
std::vector<std::string> prune_responses(const std::vector<std::string>& raw, const ltl::SkillSet& skills);

/// Similarity of two APs: 0 unless their numeric identifiers agree (both
/// absent counts as agreeing), otherwise the cosine of the embeddings of
/// the APs with identifiers stripped.
double semantic_similarity(const std::string& a, const std::string& b, gateway::Embedder& embedder);

/// Binds semantic_similarity to a shared embedder.
SimilarityFn make_similarity(std::shared_ptr<gateway::Embedder> embedder);

/// Default similarity: cached trigram embeddings.
SimilarityFn default_similarity();

/// Frequency scoring and merging over already drawn raw samples.
ResponseDistribution build_distribution(std::vector<std::string> raw, const ltl::SkillSet& skills,
                                        const EngineConfig& config, const SimilarityFn& similarity);

/// Draws m samples from `model` and builds their distribution. An all
/// invalid draw yields an empty distribution with m_k = 0.
ResponseDistribution get_responses(const gateway::ModelHandle& model, const PromptContext& prompt,
                                   const EngineConfig& config, const ltl::SkillSet& skills,
                                   const SimilarityFn& similarity);

}  // namespace nl2ltl::response

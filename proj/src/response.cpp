#include "nl2ltl/response.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <map>

#include "nl2ltl/error.hpp"
#include "nl2ltl/ltl.hpp"

namespace nl2ltl::response {
namespace {

bool is_ap(const std::string& response) {
  const auto token = ltl::classify_token(response);
  return token && token->kind == ltl::TokenKind::AtomicProposition;
}

std::string strip_identifier(const std::string& ap) {
  const auto pos = ap.rfind('_');
  if (pos == std::string::npos) return ap;
  const auto tail = std::string_view(ap).substr(pos + 1);
  if (!tail.empty() && std::all_of(tail.begin(), tail.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return ap.substr(0, pos);
  }
  return ap;
}

void sort_entries(std::vector<ResponseEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const ResponseEntry& a, const ResponseEntry& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.response < b.response;
  });
}

}  // namespace

void EngineConfig::validate() const {
  if (m < 2) throw Error(Errc::InvalidArgument, "m must be at least 2");
  if (!(zeta > 0.0 && zeta < 1.0)) throw Error(Errc::InvalidArgument, "zeta must lie in (0, 1)");
}

const ResponseEntry* ResponseDistribution::find(std::string_view response) const {
  for (const auto& e : entries) {
    if (e.response == response) return &e;
  }
  return nullptr;
}

Rational ResponseDistribution::frequency_of(std::string_view response) const {
  const auto* e = find(response);
  return e ? e->frequency : Rational(0);
}

std::string normalize_response(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> prune_responses(const std::vector<std::string>& raw, const ltl::SkillSet& skills) {
  std::vector<std::string> kept;
  kept.reserve(raw.size());
  for (const auto& r : raw) {
    auto text = ltl::canonical_symbol(normalize_response(r));
    if (text.empty()) continue;
    if (ltl::is_operator(text) || text == "(" || text == ")" || text == ltl::kEndMarker) {
      kept.push_back(std::move(text));
      continue;
    }
    if (ltl::validate_ap(text, skills)) kept.push_back(std::move(text));
  }
  return kept;
}

double semantic_similarity(const std::string& a, const std::string& b, gateway::Embedder& embedder) {
  if (a == b) return 1.0;
  const auto ra = ltl::parse_ap(a);
  const auto rb = ltl::parse_ap(b);
  if (!ra || !rb) return 0.0;
  if (ra.rule->identifier != rb.rule->identifier) return 0.0;
  return gateway::cosine(embedder.embed(strip_identifier(a)), embedder.embed(strip_identifier(b)));
}

SimilarityFn make_similarity(std::shared_ptr<gateway::Embedder> embedder) {
  return [embedder = std::move(embedder)](const std::string& a, const std::string& b) {
    return semantic_similarity(a, b, *embedder);
  };
}

SimilarityFn default_similarity() {
  return make_similarity(
      std::make_shared<gateway::CachingEmbedder>(std::make_shared<gateway::TrigramEmbedder>()));
}

ResponseDistribution build_distribution(std::vector<std::string> raw, const ltl::SkillSet& skills,
                                        const EngineConfig& config, const SimilarityFn& similarity) {
  ResponseDistribution dist;
  const auto valid = prune_responses(raw, skills);
  dist.raw = std::move(raw);
  dist.m_k = static_cast<int>(valid.size());
  if (valid.empty()) return dist;

  std::map<std::string, int> counts;
  for (const auto& v : valid) ++counts[v];
  std::vector<ResponseEntry> entries;
  for (const auto& [response, count] : counts) entries.push_back({response, count, Rational(0)});

  // Merge similar AP pairs, keeping the more frequent member (ties: the
  // lexicographically smaller). Rescan after every merge because merged
  // counts change the order and similarity need not be transitive.
  bool merged = true;
  while (merged) {
    merged = false;
    sort_entries(entries);
    for (std::size_t i = 0; i < entries.size() && !merged; ++i) {
      if (!is_ap(entries[i].response)) continue;
      for (std::size_t j = i + 1; j < entries.size(); ++j) {
        if (!is_ap(entries[j].response)) continue;
        if (similarity(entries[i].response, entries[j].response) >= config.zeta) {
          entries[i].count += entries[j].count;
          entries.erase(entries.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
          break;
        }
      }
    }
  }

  sort_entries(entries);
  for (auto& e : entries) e.frequency = Rational(e.count, dist.m_k);
  dist.entries = std::move(entries);
  return dist;
}

ResponseDistribution get_responses(const gateway::ModelHandle& model, const PromptContext& prompt,
                                   const EngineConfig& config, const ltl::SkillSet& skills,
                                   const SimilarityFn& similarity) {
  config.validate();
  std::vector<std::string> raw;
  raw.reserve(static_cast<std::size_t>(config.m));
  if (model.backend->parallel_sampling()) {
    std::vector<std::future<std::string>> pending;
    for (int i = 0; i < config.m; ++i) {
      pending.push_back(std::async(std::launch::async, [&] { return model.backend->sample(prompt); }));
    }
    // Collect every future before rethrowing so no task outlives `prompt`.
    std::exception_ptr failure;
    for (auto& f : pending) {
      try {
        raw.push_back(f.get());
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (int i = 0; i < config.m; ++i) raw.push_back(model.backend->sample(prompt));
  }
  return build_distribution(std::move(raw), skills, config, similarity);
}

}  // namespace nl2ltl::response

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "nl2ltl/conformal.hpp"
#include "nl2ltl/error.hpp"
#include "nl2ltl/gateway.hpp"
#include "nl2ltl/ltl.hpp"
#include "nl2ltl/response.hpp"

namespace testsupport {

using namespace nl2ltl;

/// Returns scripted responses per step k, cycling through the list.
class ScriptBackend final : public gateway::ModelBackend {
 public:
  explicit ScriptBackend(std::map<int, std::vector<std::string>> by_step) : by_step_(std::move(by_step)) {}

  std::string sample(const PromptContext& prompt) override {
    std::lock_guard lock(mutex_);
    if (fail_next_ > 0) {
      --fail_next_;
      throw Error(Errc::BackendUnavailable, "scripted outage");
    }
    const auto it = by_step_.find(prompt.k);
    if (it == by_step_.end() || it->second.empty()) throw Error(Errc::ProfileMiss, "no script for step");
    auto& i = counters_[prompt.k];
    ++calls_;
    return it->second[i++ % it->second.size()];
  }
  std::string describe() const override { return "script"; }

  void fail_next(int n) {
    std::lock_guard lock(mutex_);
    fail_next_ = n;
  }
  int calls() const { return calls_; }

 private:
  std::map<int, std::vector<std::string>> by_step_;
  std::map<int, std::size_t> counters_;
  std::mutex mutex_;
  int fail_next_ = 0;
  std::atomic<int> calls_{0};
};

inline gateway::ModelHandle script_handle(std::map<int, std::vector<std::string>> by_step,
                                          gateway::ModelRole role = gateway::ModelRole::Primary) {
  return {role == gateway::ModelRole::Primary ? "primary" : "auxiliary", role,
          std::make_shared<ScriptBackend>(std::move(by_step))};
}

/// Similarity stub: fixed values for listed unordered pairs, 0 otherwise.
inline response::SimilarityFn stub_similarity(std::map<std::pair<std::string, std::string>, double> pairs) {
  return [pairs = std::move(pairs)](const std::string& a, const std::string& b) {
    if (a == b) return 1.0;
    if (auto it = pairs.find({a, b}); it != pairs.end()) return it->second;
    if (auto it = pairs.find({b, a}); it != pairs.end()) return it->second;
    return 0.0;
  };
}

inline std::filesystem::path temp_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("nl2ltl-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Error code thrown by `f`, or nullopt when it returns normally.
template <typename F>
std::optional<Errc> errc_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Oracles

/// Conformal quantile with alpha given in basis points, using integer
/// arithmetic only: k = ceil((D + 1)(10000 - bp) / 10000).
template <typename T>
std::pair<T, bool> quantile_oracle(std::vector<T> scores, int alpha_bp) {
  const long long d = static_cast<long long>(scores.size());
  const long long k = ((d + 1) * (10000 - alpha_bp) + 9999) / 10000;
  if (k > d) return {T(1), true};
  std::sort(scores.begin(), scores.end());
  return {scores[static_cast<std::size_t>(k - 1)], false};
}

/// Finite-trace satisfaction straight from the definitions, recomputed for
/// every suffix with no sharing.
inline bool holds(const ltl::Node& n, const std::vector<std::set<std::string>>& trace, std::size_t i) {
  const auto size = trace.size();
  if (n.kind == ltl::NodeKind::Atom) return i < size && trace[i].count(n.text) > 0;
  const auto& op = n.text;
  if (n.kind == ltl::NodeKind::Unary) {
    const auto& c = n.children[0];
    if (op == "!") return !holds(c, trace, i);
    if (op == "X") return i + 1 < size && holds(c, trace, i + 1);
    if (op == "F") {
      for (std::size_t j = i; j < size; ++j) {
        if (holds(c, trace, j)) return true;
      }
      return false;
    }
    for (std::size_t j = i; j < size; ++j) {
      if (!holds(c, trace, j)) return false;
    }
    return true;
  }
  const auto& l = n.children[0];
  const auto& r = n.children[1];
  if (op == "&") return holds(l, trace, i) && holds(r, trace, i);
  if (op == "|") return holds(l, trace, i) || holds(r, trace, i);
  if (op == "->") return !holds(l, trace, i) || holds(r, trace, i);
  for (std::size_t j = i; j < size; ++j) {
    if (holds(r, trace, j)) {
      bool ok = true;
      for (std::size_t m = i; m < j; ++m) ok = ok && holds(l, trace, m);
      if (ok) return true;
    }
  }
  return false;
}

inline const std::vector<std::string>& unary_ops() {
  static const std::vector<std::string> ops = {"!", "X", "F", "G"};
  return ops;
}
inline const std::vector<std::string>& binary_ops() {
  static const std::vector<std::string> ops = {"&", "|", "U", "->"};
  return ops;
}

/// Every AST of depth <= max_depth (atoms have depth 1) over `atoms`.
inline std::vector<ltl::Node> all_formulas(const std::vector<std::string>& atoms, int max_depth) {
  std::vector<ltl::Node> all;
  for (const auto& a : atoms) all.push_back(ltl::Node::atom(a));
  for (int depth = 2; depth <= max_depth; ++depth) {
    const auto target = static_cast<std::size_t>(depth);
    std::vector<ltl::Node> exact;
    for (const auto& c : all) {
      if (c.depth() + 1 != target) continue;
      for (const auto& op : unary_ops()) exact.push_back(ltl::Node::unary(op, c));
    }
    for (const auto& l : all) {
      for (const auto& r : all) {
        if (std::max(l.depth(), r.depth()) + 1 != target) continue;
        for (const auto& op : binary_ops()) exact.push_back(ltl::Node::binary(op, l, r));
      }
    }
    all.insert(all.end(), exact.begin(), exact.end());
  }
  return all;
}

inline ltl::Node random_formula_of_depth(std::mt19937_64& rng, const std::vector<std::string>& atoms, int depth) {
  if (depth <= 1) return ltl::Node::atom(atoms[rng() % atoms.size()]);
  if (rng() % 2 == 0) return ltl::Node::unary(unary_ops()[rng() % 4], random_formula_of_depth(rng, atoms, depth - 1));
  auto full = random_formula_of_depth(rng, atoms, depth - 1);
  auto other = random_formula_of_depth(rng, atoms, 1 + static_cast<int>(rng() % static_cast<unsigned>(depth - 1)));
  if (rng() % 2 == 0) std::swap(full, other);
  return ltl::Node::binary(binary_ops()[rng() % 4], std::move(full), std::move(other));
}

/// Every trace of length 1..max_len whose steps are subsets of `atoms`.
inline std::vector<std::vector<std::set<std::string>>> all_traces(const std::vector<std::string>& atoms,
                                                                 std::size_t max_len) {
  std::vector<std::set<std::string>> letters;
  for (unsigned mask = 0; mask < (1u << atoms.size()); ++mask) {
    std::set<std::string> s;
    for (std::size_t b = 0; b < atoms.size(); ++b) {
      if (mask & (1u << b)) s.insert(atoms[b]);
    }
    letters.push_back(s);
  }
  std::vector<std::vector<std::set<std::string>>> out;
  std::vector<std::vector<std::set<std::string>>> frontier = {{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<std::set<std::string>>> next;
    for (const auto& prefix : frontier) {
      for (const auto& l : letters) {
        auto t = prefix;
        t.push_back(l);
        next.push_back(t);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

/// Cosine of character-trigram count vectors over "#text#" with exact
/// string keys (no hashing).
inline double trigram_cosine_oracle(const std::string& a, const std::string& b) {
  auto grams = [](const std::string& s) {
    const auto padded = "#" + s + "#";
    std::map<std::string, int> g;
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) ++g[padded.substr(i, 3)];
    return g;
  };
  const auto ga = grams(a), gb = grams(b);
  double dot = 0, na = 0, nb = 0;
  for (const auto& [k, v] : ga) {
    na += v * v;
    if (auto it = gb.find(k); it != gb.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : gb) nb += v * v;
  return dot / std::sqrt(na * nb);
}

/// Random distribution over a subset of `alphabet` with counts summing to m_k.
inline response::ResponseDistribution random_distribution(std::mt19937_64& rng, const std::vector<std::string>& alphabet,
                                                          int max_mk) {
  response::ResponseDistribution d;
  const int m_k = static_cast<int>(rng() % static_cast<unsigned>(max_mk + 1));
  d.m_k = m_k;
  if (m_k == 0) return d;
  std::map<std::string, int> counts;
  for (int i = 0; i < m_k; ++i) ++counts[alphabet[rng() % alphabet.size()]];
  for (const auto& [r, c] : counts) d.entries.push_back({r, c, Rational(c, m_k)});
  std::sort(d.entries.begin(), d.entries.end(), [](const auto& x, const auto& y) {
    return x.count != y.count ? x.count > y.count : x.response < y.response;
  });
  return d;
}

}  // namespace testsupport

#include "nl2ltl/synthetic.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "nl2ltl/error.hpp"

namespace nl2ltl::synthetic {

namespace {

constexpr std::array<std::string_view, 10> kRegions = {"storage", "house", "office", "street", "region",
                                                       "kitchen", "garage", "lobby", "dock", "yard"};
constexpr std::array<std::string_view, 8> kObjects = {"box", "package", "bottle", "crate",
                                                      "pass", "tool", "parcel", "book"};
constexpr std::array<std::string_view, 11> kStructural = {"F", "G", "X", "!", "&", "|", "U", "->", "(", ")", "/"};
constexpr std::array<std::string_view, 6> kInvalid = {"pick_box_1", "F G", "pre%blocks", "go to house", "F(", "p_box_1 & pd"};

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::string random_atom(std::mt19937_64& rng) {
  const auto roll = uniform(rng, 0, 1);
  const auto id = std::to_string(uniform_int(rng, 1, 9));
  if (roll < 0.45) return std::string(kRegions[uniform_int(rng, 0, kRegions.size() - 1)]) + "_" + id;
  if (roll < 0.85) return "p_" + std::string(kObjects[uniform_int(rng, 0, kObjects.size() - 1)]) + "_" + id;
  return roll < 0.95 ? "pd" : "photo";
}

ltl::Node random_node(std::mt19937_64& rng, int depth) {
  if (depth == 0 || uniform(rng, 0, 1) < 0.3) return ltl::Node::atom(random_atom(rng));
  if (uniform(rng, 0, 1) < 0.45) {
    static constexpr std::array<const char*, 4> unary = {"F", "G", "X", "!"};
    return ltl::Node::unary(unary[uniform_int(rng, 0, 3)], random_node(rng, depth - 1));
  }
  static constexpr std::array<const char*, 4> binary = {"&", "|", "U", "->"};
  auto left = random_node(rng, depth - 1);
  return ltl::Node::binary(binary[uniform_int(rng, 0, 3)], std::move(left), random_node(rng, depth - 1));
}

std::optional<int> identifier_of(const std::string& ap) {
  const auto verdict = ltl::parse_ap(ap);
  return verdict.valid() ? verdict.rule->identifier : std::nullopt;
}

/// Wrong responses a model might give instead of `truth`.
std::vector<std::string> distractor_pool(std::mt19937_64& rng, const std::string& truth) {
  std::vector<std::string> pool;
  const auto token = ltl::classify_token(truth);
  if (token && token->kind == ltl::TokenKind::AtomicProposition) {
    // Distinct identifiers, none equal to the truth's, so nothing merges.
    std::vector<int> ids = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    if (const auto id = identifier_of(truth)) ids.erase(std::remove(ids.begin(), ids.end(), *id), ids.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto id = std::to_string(ids[i]);
      pool.push_back(i % 2 == 0 ? std::string(kRegions[uniform_int(rng, 0, kRegions.size() - 1)]) + "_" + id
                                : "p_" + std::string(kObjects[uniform_int(rng, 0, kObjects.size() - 1)]) + "_" + id);
    }
    pool.push_back(truth == "pd" ? "photo" : "pd");
    pool.push_back("F");
  } else {
    for (const auto s : kStructural) {
      if (s != truth) pool.emplace_back(s);
    }
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  return pool;
}

std::vector<std::pair<std::string, double>> make_distribution(std::mt19937_64& rng, const std::string& truth,
                                                              double p_truth, const std::vector<std::string>& wrong,
                                                              double invalid_rate) {
  std::vector<std::pair<std::string, double>> dist;
  if (p_truth > 0) dist.emplace_back(truth, p_truth);
  double rest = 1.0 - p_truth;
  if (rest <= 0) return dist;
  if (uniform(rng, 0, 1) < invalid_rate) {
    const double invalid = rest * uniform(rng, 0.1, 0.5);
    dist.emplace_back(std::string(kInvalid[uniform_int(rng, 0, kInvalid.size() - 1)]), invalid);
    rest -= invalid;
  }
  std::vector<double> weights;
  for (std::size_t i = 0; i < wrong.size(); ++i) weights.push_back(uniform(rng, 0.2, 1.0));
  double total = 0;
  for (const auto w : weights) total += w;
  for (std::size_t i = 0; i < wrong.size(); ++i) dist.emplace_back(wrong[i], rest * weights[i] / total);
  // Absorb rounding so the table sums to one.
  double sum = 0;
  for (const auto& [r, p] : dist) sum += p;
  dist.back().second += 1.0 - sum;
  return dist;
}

std::string describe_node(const ltl::Node& n) {
  if (n.kind == ltl::NodeKind::Atom) {
    if (n.text == "pd") return "put it down";
    if (n.text == "photo") return "take a photo";
    std::string text = n.text;
    std::replace(text.begin(), text.end(), '_', ' ');
    return text.rfind("p ", 0) == 0 ? "pick up the " + text.substr(2) : "be at " + text;
  }
  if (n.kind == ltl::NodeKind::Unary) {
    const auto inner = describe_node(n.children[0]);
    if (n.text == "F") return "eventually " + inner;
    if (n.text == "G") return "always " + inner;
    if (n.text == "X") return "next " + inner;
    return "not (" + inner + ")";
  }
  const auto l = describe_node(n.children[0]);
  const auto r = describe_node(n.children[1]);
  if (n.text == "&") return "(" + l + " and " + r + ")";
  if (n.text == "|") return "(" + l + " or " + r + ")";
  if (n.text == "U") return "(" + l + " until " + r + ")";
  return "(if " + l + " then " + r + ")";
}

}  // namespace

ltl::Formula random_formula(std::mt19937_64& rng, int length) {
  if (length < 2) throw Error(Errc::InvalidArgument, "formula length must be at least 2");
  for (int attempt = 0; attempt < 200000; ++attempt) {
    auto formula = ltl::Formula::from_ast(random_node(rng, 4));
    if (static_cast<int>(formula.tokens().size()) + 1 == length) return formula;
  }
  throw Error(Errc::InvalidArgument, "no random formula of length " + std::to_string(length));
}

std::string describe_formula(const ltl::Formula& formula) { return describe_node(formula.ast()); }

double draw_truth_probability(std::mt19937_64& rng) {
  const auto roll = uniform(rng, 0, 1);
  if (roll < 0.80) return uniform(rng, 0.9, 1.0);
  if (roll < 0.95) return uniform(rng, 0.6, 0.9);
  return uniform(rng, 0.3, 0.6);
}

SyntheticCorpus generate(const SyntheticOptions& options) {
  if (options.min_tokens < 2 || options.max_tokens < options.min_tokens) {
    throw Error(Errc::InvalidArgument, "bad synthetic length range");
  }
  std::mt19937_64 rng(options.seed);
  SyntheticCorpus corpus;
  corpus.primary = std::make_shared<gateway::SimulatedProfile>(gateway::mix64(options.seed));
  corpus.auxiliary = std::make_shared<gateway::SimulatedProfile>(gateway::mix64(options.seed + 1));

  for (std::size_t i = 0; i < options.n_scenarios; ++i) {
    const auto length = uniform_int(rng, options.min_tokens, options.max_tokens);
    const auto formula = random_formula(rng, length);
    Scenario s;
    s.id = "syn-" + std::to_string(i + 1);
    s.nl_task = "Task " + std::to_string(i + 1) + ": " + describe_formula(formula) + ".";
    s.skills = ltl::all_skills();
    s.difficulty = length <= 5 ? Difficulty::Easy : length <= 9 ? Difficulty::Medium : Difficulty::Hard;
    s.ground_truth_tokens = formula.token_texts();

    auto sequence = *s.ground_truth_tokens;
    sequence.emplace_back(ltl::kEndMarker);
    std::vector<std::string> prefix;
    for (std::size_t k = 0; k < sequence.size(); ++k) {
      const auto& truth = sequence[k];
      const bool failure = uniform(rng, 0, 1) < options.failure_rate;
      const double p = failure ? 0.0 : draw_truth_probability(rng);
      const double p_aux =
          failure ? 0.0 : std::clamp(p + std::normal_distribution<double>(0, options.aux_jitter)(rng), 0.3, 1.0);

      // Split the wrong answers so the two models rarely agree on them.
      auto pool = distractor_pool(rng, truth);
      const auto n_primary = static_cast<std::size_t>(uniform_int(rng, 1, 3));
      const auto n_aux = static_cast<std::size_t>(uniform_int(rng, 1, 3));
      std::vector<std::string> wrong_primary(pool.begin(), pool.begin() + n_primary);
      std::vector<std::string> wrong_aux(pool.begin() + n_primary, pool.begin() + n_primary + n_aux);
      if (uniform(rng, 0, 1) < 0.1) wrong_aux.push_back(wrong_primary.front());

      gateway::ProfileEntry entry;
      entry.task = s.nl_task;
      entry.status = prefix;
      entry.k = static_cast<int>(k) + 1;
      entry.truth = truth;
      entry.dist = make_distribution(rng, truth, p, wrong_primary, options.invalid_rate);
      corpus.primary->add(entry);
      entry.dist = make_distribution(rng, truth, p_aux, wrong_aux, options.invalid_rate);
      corpus.auxiliary->add(entry);
      prefix.push_back(truth);
    }
    corpus.scenarios.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace nl2ltl::synthetic

#include "nl2ltl/scenario.hpp"

#include <fstream>

#include "nl2ltl/error.hpp"
#include "nl2ltl/ltl.hpp"

namespace nl2ltl {

using nlohmann::json;

std::string difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
  }
  return "easy";
}

Difficulty parse_difficulty(const std::string& text) {
  if (text == "easy") return Difficulty::Easy;
  if (text == "medium") return Difficulty::Medium;
  if (text == "hard") return Difficulty::Hard;
  throw Error(Errc::InvalidArgument, "unknown difficulty '" + text + "'");
}

std::vector<std::string> strip_end_marker(std::vector<std::string> tokens) {
  if (!tokens.empty() && tokens.back() == ltl::kEndMarker) tokens.pop_back();
  return tokens;
}

std::vector<std::vector<std::string>> Scenario::correct_sequences() const {
  std::vector<std::vector<std::string>> out;
  auto push = [&](std::vector<std::string> tokens) {
    tokens.emplace_back(ltl::kEndMarker);
    out.push_back(std::move(tokens));
  };
  if (ground_truth_tokens) push(*ground_truth_tokens);
  for (const auto& eq : equivalents) push(eq);
  return out;
}

bool Scenario::is_correct(const std::vector<std::string>& tokens) const {
  const auto bare = strip_end_marker(tokens);
  if (ground_truth_tokens && *ground_truth_tokens == bare) return true;
  for (const auto& eq : equivalents) {
    if (eq == bare) return true;
  }
  return false;
}

json Scenario::to_json() const {
  json doc = {{"id", id},
              {"nl_task", nl_task},
              {"skills", ltl::skill_names(skills)},
              {"difficulty", difficulty_name(difficulty)}};
  if (ground_truth_tokens) doc["formula_tokens"] = *ground_truth_tokens;
  if (!equivalents.empty()) doc["equivalents"] = equivalents;
  return doc;
}

Scenario Scenario::from_json(const json& doc) {
  try {
    Scenario s;
    s.id = doc.at("id").get<std::string>();
    s.nl_task = doc.at("nl_task").get<std::string>();
    s.skills = ltl::parse_skills(doc.at("skills").get<std::vector<std::string>>());
    if (s.skills.empty()) throw Error(Errc::InvalidArgument, "scenario " + s.id + " has no skills");
    s.difficulty = parse_difficulty(doc.value("difficulty", std::string("easy")));
    auto canonical = [&](std::vector<std::string> tokens) {
      // Parsing validates the tokens and canonicalizes glyph aliases.
      return ltl::parse_tokens(tokens).token_texts();
    };
    if (doc.contains("formula_tokens") && !doc["formula_tokens"].is_null()) {
      s.ground_truth_tokens = canonical(doc["formula_tokens"].get<std::vector<std::string>>());
    }
    if (doc.contains("equivalents")) {
      for (const auto& eq : doc["equivalents"]) s.equivalents.push_back(canonical(eq.get<std::vector<std::string>>()));
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("scenario record: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidArgument) throw;
    throw Error(Errc::InvalidArgument, std::string("scenario formula: ") + e.what());
  }
}

std::vector<Scenario> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open corpus " + path);
  std::vector<Scenario> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Scenario::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidArgument, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_corpus(const std::vector<Scenario>& scenarios, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write corpus " + path);
  for (const auto& s : scenarios) out << s.to_json().dump() << "\n";
}

}  // namespace nl2ltl

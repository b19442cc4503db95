#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nl2ltl/ap.hpp"

namespace nl2ltl {

enum class Difficulty { Easy, Medium, Hard };

std::string difficulty_name(Difficulty d);
Difficulty parse_difficulty(const std::string& text);

/// A natural-language task with the skills it is grounded in. Ground-truth
/// token lists exclude the end marker.
struct Scenario {
  std::string id;
  std::string nl_task;
  ltl::SkillSet skills;
  Difficulty difficulty = Difficulty::Easy;
  std::optional<std::vector<std::string>> ground_truth_tokens;
  std::vector<std::vector<std::string>> equivalents;

  /// Ground truth followed by the equivalents, each terminated by "/".
  std::vector<std::vector<std::string>> correct_sequences() const;
  /// Whether `tokens` (with or without trailing "/") is one of the correct formulas.
  bool is_correct(const std::vector<std::string>& tokens) const;

  nlohmann::json to_json() const;
  /// Throws InvalidArgument on missing fields, empty skills or formulas that
  /// do not parse.
  static Scenario from_json(const nlohmann::json& doc);
};

std::vector<Scenario> load_corpus(const std::string& path);
void save_corpus(const std::vector<Scenario>& scenarios, const std::string& path);

/// Token list with any trailing "/" removed.
std::vector<std::string> strip_end_marker(std::vector<std::string> tokens);

}  // namespace nl2ltl

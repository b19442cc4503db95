#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nl2ltl {

/// Parts (a) and (b) of every prompt: translation rules and n-shot examples.
/// Constant for a configuration, so they feed the config fingerprint.
struct PromptTemplate {
  std::string rules;
  std::string shots;

  static PromptTemplate default_template();
  static PromptTemplate load(const std::string& path);
};

/// One fully assembled step prompt.
struct PromptContext {
  std::string rules;
  std::string shots;
  std::string task;
  std::vector<std::string> status;  // partial formula so far
  int k = 1;

  /// Part (d) as shown to the model.
  std::string status_text() const;
  /// The user-side message: task description plus current status.
  std::string task_message() const;

  friend bool operator==(const PromptContext&, const PromptContext&) = default;
};

/// FNV-1a, stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Key used to look prompts up in simulated profiles: hash of task text,
/// status tokens and step index. Rules and shots are ignored.
std::uint64_t prompt_key(std::string_view task, const std::vector<std::string>& status, int k);
inline std::uint64_t prompt_key(const PromptContext& prompt) {
  return prompt_key(prompt.task, prompt.status, prompt.k);
}

}  // namespace nl2ltl

#include "nl2ltl/prompt.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nl2ltl/error.hpp"

namespace nl2ltl {

PromptTemplate PromptTemplate::default_template() {
  PromptTemplate t;
  t.rules =
      "You translate a robot task written in natural language into a Linear Temporal Logic formula, "
      "one token per answer.\n"
      "Operators: F (eventually), G (always), U (until), X (next), & (and), | (or), ! (not), "
      "-> (implies), ( and ).\n"
      "Atomic propositions:\n"
      "  lmk_X    true when the robot is at landmark 'lmk' with identifier X\n"
      "  p_lmk_X  true when the robot picks up landmark 'lmk' with identifier X\n"
      "  pd       true when the robot puts down the object it carries\n"
      "  photo    true when the robot takes a photo\n"
      "Omit _X when the task gives the landmark no identifier.\n"
      "Answer with exactly one operator, one parenthesis, or one atomic proposition. "
      "When the formula is complete, answer '/'.";
  t.shots =
      "Task: Eventually pick up the red box and then put it down in storage.\n"
      "Formula so far: F ( p_red_box & F ( storage & pd ) )\n"
      "Answer: /\n"
      "Task: Never pick up crate 8.\n"
      "Formula so far: G (\n"
      "Answer: !";
  return t;
}

PromptTemplate PromptTemplate::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open prompt template " + path);
  try {
    const auto doc = nlohmann::json::parse(in);
    PromptTemplate t;
    t.rules = doc.at("rules").get<std::string>();
    t.shots = doc.value("shots", std::string());
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, "prompt template " + path + ": " + e.what());
  }
}

std::string PromptContext::status_text() const {
  std::ostringstream out;
  out << "Formula so far: ";
  if (status.empty()) {
    out << "empty";
  } else {
    for (std::size_t i = 0; i < status.size(); ++i) out << (i ? " " : "") << status[i];
  }
  out << "\nStep: " << k;
  return out.str();
}

std::string PromptContext::task_message() const { return "Task: " + task + "\n" + status_text(); }

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t prompt_key(std::string_view task, const std::vector<std::string>& status, int k) {
  auto h = fnv1a64(task);
  h = fnv1a64("\x1f", h);
  for (const auto& token : status) {
    h = fnv1a64(token, h);
    h = fnv1a64("\x1e", h);
  }
  h = fnv1a64("\x1f", h);
  return fnv1a64(std::to_string(k), h);
}

}  // namespace nl2ltl

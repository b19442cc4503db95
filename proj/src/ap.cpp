#include "nl2ltl/ap.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "nl2ltl/error.hpp"

namespace nl2ltl::ltl {
namespace {

std::string squash(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

// Verb-like leading segments that name an action but are not the canonical
// "p_" prefix, e.g. "pick_box_1" or "goto_kitchen".
constexpr std::array<std::string_view, 18> kActionWords = {
    "pick", "pickup", "picked", "grab", "take", "put", "putdown", "place", "drop",
    "move", "moveto", "goto", "go", "visit", "reach", "deliver", "photograph", "picture",
};

constexpr std::array<std::string_view, 4> kReservedNames = {"F", "G", "U", "X"};

bool is_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool has_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<std::string_view> split_underscore(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find('_', start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      break;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

ApVerdict invalid(ApReason reason) { return ApVerdict{std::nullopt, reason}; }

}  // namespace

std::optional<Skill> parse_skill(std::string_view text) {
  const auto key = squash(text);
  if (key == "moveto" || key == "move" || key == "goto" || key == "navigate") return Skill::MoveTo;
  if (key == "pickup" || key == "pick") return Skill::PickUp;
  if (key == "putdown" || key == "put" || key == "drop") return Skill::PutDown;
  if (key == "takeapicture" || key == "takepicture" || key == "takeaphoto" || key == "photo" ||
      key == "takephoto")
    return Skill::TakePhoto;
  return std::nullopt;
}

std::string skill_name(Skill skill) {
  switch (skill) {
    case Skill::MoveTo: return "move to";
    case Skill::PickUp: return "pick up";
    case Skill::PutDown: return "put down";
    case Skill::TakePhoto: return "take a picture";
  }
  return "";
}

SkillSet parse_skills(const std::vector<std::string>& names) {
  SkillSet out;
  for (const auto& name : names) {
    const auto skill = parse_skill(name);
    if (!skill) throw Error(Errc::InvalidArgument, "unknown skill '" + name + "'");
    out.insert(*skill);
  }
  return out;
}

std::vector<std::string> skill_names(const SkillSet& skills) {
  std::vector<std::string> out;
  for (auto s : skills) out.push_back(skill_name(s));
  return out;
}

const SkillSet& all_skills() {
  static const SkillSet skills{Skill::MoveTo, Skill::PickUp, Skill::PutDown, Skill::TakePhoto};
  return skills;
}

std::string_view ap_reason_name(ApReason reason) noexcept {
  switch (reason) {
    case ApReason::BadPrefix: return "BadPrefix";
    case ApReason::BadIdentifier: return "BadIdentifier";
    case ApReason::MultipleTokens: return "MultipleTokens";
    case ApReason::UnknownPattern: return "UnknownPattern";
  }
  return "";
}

ApVerdict validate_ap(std::string_view text, const SkillSet& skills) {
  if (text.empty()) return invalid(ApReason::UnknownPattern);

  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) return invalid(ApReason::MultipleTokens);
  }
  // Operator symbols or parentheses glued to a name mean more than one token.
  if (text.find_first_of("&|!()") != std::string_view::npos || text.find("->") != std::string_view::npos) {
    return invalid(ApReason::MultipleTokens);
  }
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (!std::isalnum(uc) && c != '_') return invalid(ApReason::UnknownPattern);
  }
  if (std::find(kReservedNames.begin(), kReservedNames.end(), text) != kReservedNames.end()) {
    return invalid(ApReason::UnknownPattern);
  }

  const auto need = [&](Skill skill, ApRule rule) -> ApVerdict {
    if (!skills.count(skill)) return invalid(ApReason::BadPrefix);
    return ApVerdict{std::move(rule), std::nullopt};
  };

  if (text == "pd") return need(Skill::PutDown, ApRule{ApPattern::PutDown, "", std::nullopt});
  if (text == "photo") return need(Skill::TakePhoto, ApRule{ApPattern::Photo, "", std::nullopt});

  const auto parts = split_underscore(text);
  for (auto part : parts) {
    if (part.empty()) return invalid(ApReason::UnknownPattern);
  }

  std::optional<std::uint64_t> identifier;
  std::size_t name_end = parts.size();
  if (parts.size() > 1 && is_digits(parts.back())) {
    if (parts.back().size() > 18) return invalid(ApReason::BadIdentifier);
    identifier = std::stoull(std::string(parts.back()));
    name_end = parts.size() - 1;
  }
  if (name_end == 0) return invalid(ApReason::UnknownPattern);

  for (std::size_t i = 0; i < name_end; ++i) {
    // digits anywhere but a trailing "_X" segment: "box1", "box_1_2", "1a"
    if (has_digit(parts[i])) return invalid(ApReason::BadIdentifier);
  }

  const auto head = parts.front();
  if ((head == "pd" || head == "photo") && name_end == 1 && identifier) {
    return invalid(ApReason::BadIdentifier);
  }

  if (head == "p") {
    if (name_end < 2) return invalid(ApReason::UnknownPattern);
    std::string landmark;
    for (std::size_t i = 1; i < name_end; ++i) {
      if (!landmark.empty()) landmark.push_back('_');
      landmark.append(parts[i]);
    }
    return need(Skill::PickUp, ApRule{ApPattern::Pickup, landmark, identifier});
  }

  std::string lowered(head);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (name_end > 1 || identifier) {
    if (std::find(kActionWords.begin(), kActionWords.end(), lowered) != kActionWords.end()) {
      return invalid(ApReason::BadPrefix);
    }
  }

  std::string landmark;
  for (std::size_t i = 0; i < name_end; ++i) {
    if (!landmark.empty()) landmark.push_back('_');
    landmark.append(parts[i]);
  }
  return need(Skill::MoveTo, ApRule{ApPattern::Region, landmark, identifier});
}

}  // namespace nl2ltl::ltl

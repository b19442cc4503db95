#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace nl2ltl::ltl {

/// Robot skills an atomic proposition can be grounded in.
enum class Skill { MoveTo, PickUp, PutDown, TakePhoto };

using SkillSet = std::set<Skill>;

/// Accepts "move to", "move_to", "pick up", "put down", "take a picture",
/// "photo" and similar spellings. Returns nullopt on anything else.
std::optional<Skill> parse_skill(std::string_view text);
std::string skill_name(Skill skill);
SkillSet parse_skills(const std::vector<std::string>& names);
std::vector<std::string> skill_names(const SkillSet& skills);
const SkillSet& all_skills();

enum class ApPattern { Region, Pickup, PutDown, Photo };

struct ApRule {
  ApPattern pattern = ApPattern::Region;
  std::string landmark;                  // empty for PutDown / Photo
  std::optional<std::uint64_t> identifier;

  friend bool operator==(const ApRule&, const ApRule&) = default;
};

enum class ApReason { BadPrefix, BadIdentifier, MultipleTokens, UnknownPattern };

std::string_view ap_reason_name(ApReason reason) noexcept;

struct ApVerdict {
  std::optional<ApRule> rule;
  std::optional<ApReason> reason;

  bool valid() const noexcept { return rule.has_value(); }
  explicit operator bool() const noexcept { return valid(); }
};

/// Checks `text` against the four AP shapes (`lmk[_X]`, `p_lmk[_X]`, `pd`,
/// `photo`) and requires the matching skill to be in `skills`.
ApVerdict validate_ap(std::string_view text, const SkillSet& skills);

/// Shape check only, as if every skill were available.
inline ApVerdict parse_ap(std::string_view text) { return validate_ap(text, all_skills()); }

}  // namespace nl2ltl::ltl

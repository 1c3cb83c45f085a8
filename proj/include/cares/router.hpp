#pragma once

#include <optional>
#include <string_view>

#include "cares/knowledge.hpp"
#include "cares/promptgen.hpp"

namespace cares {

enum class Pathway { Resident, Attending, Expert };

std::string_view to_string(Pathway pathway) noexcept;
std::optional<Pathway> parse_pathway(std::string_view s) noexcept;
/// Expertise level whose prompts a pathway's three agents use.
ExpertiseLevel pathway_level(Pathway pathway) noexcept;

/// Composite risk: tis + cis, in [2, 6] for a valid profile.
int risk_score(const RiskProfile& profile) noexcept;

/// {2,3} -> Resident, {4,5} -> Attending, {6} -> Expert. Throws
/// OutOfRangeScore otherwise.
Pathway route(int score);

inline Pathway route(const RiskProfile& profile) { return route(risk_score(profile)); }

}  // namespace cares

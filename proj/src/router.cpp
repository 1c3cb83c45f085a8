#include "cares/router.hpp"

#include <string>

#include "cares/error.hpp"

namespace cares {

std::string_view to_string(Pathway pathway) noexcept {
  switch (pathway) {
    case Pathway::Resident: return "Resident";
    case Pathway::Attending: return "Attending";
    case Pathway::Expert: return "Expert";
  }
  return "?";
}

std::optional<Pathway> parse_pathway(std::string_view s) noexcept {
  for (auto p : {Pathway::Resident, Pathway::Attending, Pathway::Expert}) {
    if (s == to_string(p)) return p;
  }
  return std::nullopt;
}

ExpertiseLevel pathway_level(Pathway pathway) noexcept {
  switch (pathway) {
    case Pathway::Resident: return ExpertiseLevel::Resident;
    case Pathway::Attending: return ExpertiseLevel::Attending;
    case Pathway::Expert: return ExpertiseLevel::Expert;
  }
  return ExpertiseLevel::Resident;
}

int risk_score(const RiskProfile& profile) noexcept { return profile.tis + profile.cis; }

Pathway route(int score) {
  switch (score) {
    case 2:
    case 3: return Pathway::Resident;
    case 4:
    case 5: return Pathway::Attending;
    case 6: return Pathway::Expert;
    default:
      throw Error(ErrorCode::OutOfRangeScore,
                  "risk score " + std::to_string(score) + " outside [2, 6]");
  }
}

}  // namespace cares

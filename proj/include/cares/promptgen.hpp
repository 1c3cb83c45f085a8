#pragma once

#include <array>
#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cares/knowledge.hpp"

namespace cares {

enum class ExpertiseLevel { Resident, Attending, Expert };
enum class Perspective { Temporal, Spatial, Procedural };

inline constexpr std::array<ExpertiseLevel, 3> kAllLevels = {
    ExpertiseLevel::Resident, ExpertiseLevel::Attending, ExpertiseLevel::Expert};
inline constexpr std::array<Perspective, 3> kAllPerspectives = {
    Perspective::Temporal, Perspective::Spatial, Perspective::Procedural};

std::string_view to_string(ExpertiseLevel level) noexcept;
std::string_view to_string(Perspective perspective) noexcept;
/// Single-letter codes used in request ids: R/A/E and T/S/P.
char code(ExpertiseLevel level) noexcept;
char code(Perspective perspective) noexcept;
std::optional<ExpertiseLevel> parse_level(std::string_view s) noexcept;
std::optional<Perspective> parse_perspective(std::string_view s) noexcept;

/// Role phrase every system text for the level must contain.
std::string_view role_phrase(ExpertiseLevel level) noexcept;

inline constexpr std::string_view kSentinelError = "ASSESSMENT: ERROR";
inline constexpr std::string_view kSentinelNoError = "ASSESSMENT: NO_ERROR";

struct PromptKey {
  int error_id = 0;
  ExpertiseLevel level = ExpertiseLevel::Resident;
  Perspective perspective = Perspective::Temporal;

  auto operator<=>(const PromptKey&) const = default;
};

std::string to_string(const PromptKey& key);

enum class PromptKind { Agent, GenericCoT, Baseline };

struct CoTPrompt {
  PromptKind kind = PromptKind::Agent;
  int error_id = 0;
  std::optional<ExpertiseLevel> level;
  std::optional<Perspective> perspective;
  std::string system_text;
  std::vector<std::string> reasoning_steps;
  std::string output_instruction;

  /// Numbered reasoning steps followed by the output instruction.
  std::string user_text() const;
  /// system_text, then user_text(), separated by a blank line.
  std::string render() const;
};

/// Template files loaded from a directory. Placeholders: {error_name},
/// {error_description}, {definitions}, {normal_indicators},
/// {error_indicators}, {focus_areas}, {frame_count}.
struct TemplateSet {
  std::map<ExpertiseLevel, std::string> level_frames;
  std::map<Perspective, std::string> perspective_frames;
  std::map<std::pair<ExpertiseLevel, Perspective>, std::vector<std::string>> steps;
  std::string output_instruction;
  std::string generic_cot_frame;
  std::vector<std::string> generic_cot_steps;
  std::string baseline_frame;

  /// Throws TemplateError on a missing file or a broken sentinel contract.
  static TemplateSet load(const std::filesystem::path& dir);
};

std::filesystem::path default_template_dir();
/// Loaded once from default_template_dir().
const TemplateSet& default_templates();

struct PromptOptions {
  int frame_count = 8;
};

CoTPrompt generate_prompt(const ErrorCategory& category, const KnowledgeRepository& knowledge,
                          ExpertiseLevel level, Perspective perspective,
                          const TemplateSet& templates = default_templates(),
                          const PromptOptions& options = {});

class PromptLibrary {
 public:
  explicit PromptLibrary(std::map<PromptKey, CoTPrompt> prompts) : prompts_(std::move(prompts)) {}

  const CoTPrompt& at(const PromptKey& key) const;
  const CoTPrompt& at(int error_id, ExpertiseLevel level, Perspective perspective) const {
    return at(PromptKey{error_id, level, perspective});
  }
  std::size_t size() const noexcept { return prompts_.size(); }
  const std::map<PromptKey, CoTPrompt>& prompts() const noexcept { return prompts_; }

 private:
  std::map<PromptKey, CoTPrompt> prompts_;
};

PromptLibrary generate_library(const KnowledgeBase& kb,
                               const TemplateSet& templates = default_templates(),
                               const PromptOptions& options = {});

CoTPrompt generic_cot_prompt(const ErrorCategory& category,
                             const TemplateSet& templates = default_templates(),
                             const PromptOptions& options = {});

CoTPrompt baseline_prompt(const ErrorCategory& category,
                          const TemplateSet& templates = default_templates(),
                          const PromptOptions& options = {});

/// Non-overlapping occurrences of needle in haystack.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

}  // namespace cares

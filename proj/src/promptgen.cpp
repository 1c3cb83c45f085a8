#include "cares/promptgen.hpp"

#include <fstream>
#include <sstream>

#include "cares/error.hpp"

namespace cares {
namespace {

using Context = std::map<std::string, std::string, std::less<>>;

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i != 0) out += sep;
    out += items[i];
  }
  return out;
}

bool is_placeholder_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!((c >= 'a' && c <= 'z') || c == '_')) return false;
  }
  return true;
}

// {name} is replaced from ctx; any other brace text is literal.
std::string substitute(std::string_view tmpl, const Context& ctx, std::string_view origin) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(open));
      break;
    }
    const auto name = tmpl.substr(open + 1, close - open - 1);
    if (!is_placeholder_name(name)) {
      out.push_back('{');
      pos = open + 1;
      continue;
    }
    const auto it = ctx.find(name);
    if (it == ctx.end()) {
      throw Error(ErrorCode::TemplateError,
                  "placeholder {" + std::string(name) + "} not available in " + std::string(origin));
    }
    out += it->second;
    pos = close + 1;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::TemplateError, "cannot open template " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ')) {
    text.pop_back();
  }
  if (text.empty()) {
    throw Error(ErrorCode::TemplateError, "template " + path.string() + " is empty");
  }
  return text;
}

std::vector<std::string> read_steps(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> steps;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    steps.push_back(line);
  }
  if (steps.empty()) {
    throw Error(ErrorCode::TemplateError, "step list " + path.string() + " has no steps");
  }
  return steps;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

void check_no_sentinel(const std::string& text, const std::string& origin) {
  if (count_occurrences(text, kSentinelError) != 0 || count_occurrences(text, kSentinelNoError) != 0) {
    throw Error(ErrorCode::TemplateError, origin + " must not contain a verdict sentinel");
  }
}

void check_sentinels_once(const std::string& text, const std::string& origin) {
  if (count_occurrences(text, kSentinelError) != 1 || count_occurrences(text, kSentinelNoError) != 1) {
    throw Error(ErrorCode::TemplateError,
                origin + " must contain each verdict sentinel exactly once");
  }
}

Context base_context(const ErrorCategory& category, const PromptOptions& options) {
  return Context{
      {"error_name", category.name},
      {"error_description", category.description},
      {"frame_count", std::to_string(options.frame_count)},
  };
}

std::string render_output_instruction(const TemplateSet& templates, const Context& ctx) {
  std::string text = substitute(templates.output_instruction, ctx, "output_instruction");
  check_sentinels_once(text, "rendered output instruction");
  return text;
}

}  // namespace

std::string_view to_string(ExpertiseLevel level) noexcept {
  switch (level) {
    case ExpertiseLevel::Resident: return "Resident";
    case ExpertiseLevel::Attending: return "Attending";
    case ExpertiseLevel::Expert: return "Expert";
  }
  return "?";
}

std::string_view to_string(Perspective perspective) noexcept {
  switch (perspective) {
    case Perspective::Temporal: return "Temporal";
    case Perspective::Spatial: return "Spatial";
    case Perspective::Procedural: return "Procedural";
  }
  return "?";
}

char code(ExpertiseLevel level) noexcept { return to_string(level).front(); }
char code(Perspective perspective) noexcept { return to_string(perspective).front(); }

std::optional<ExpertiseLevel> parse_level(std::string_view s) noexcept {
  for (auto level : kAllLevels) {
    if (s == to_string(level) || (s.size() == 1 && s.front() == code(level))) return level;
  }
  return std::nullopt;
}

std::optional<Perspective> parse_perspective(std::string_view s) noexcept {
  for (auto p : kAllPerspectives) {
    if (s == to_string(p) || (s.size() == 1 && s.front() == code(p))) return p;
  }
  return std::nullopt;
}

std::string_view role_phrase(ExpertiseLevel level) noexcept {
  switch (level) {
    case ExpertiseLevel::Resident: return "surgical resident";
    case ExpertiseLevel::Attending: return "attending surgeon";
    case ExpertiseLevel::Expert: return "expert surgeon";
  }
  return "";
}

std::string to_string(const PromptKey& key) {
  return "e" + std::to_string(key.error_id) + "/" + std::string(to_string(key.level)) + "/" +
         std::string(to_string(key.perspective));
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string CoTPrompt::user_text() const {
  std::string out;
  for (std::size_t i = 0; i < reasoning_steps.size(); ++i) {
    out += std::to_string(i + 1) + ". " + reasoning_steps[i] + "\n";
  }
  if (!out.empty()) out += "\n";
  out += output_instruction;
  return out;
}

std::string CoTPrompt::render() const { return system_text + "\n\n" + user_text(); }

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  TemplateSet t;
  for (auto level : kAllLevels) {
    const auto name = "level_" + lower(to_string(level)) + ".txt";
    t.level_frames[level] = read_file(dir / name);
    check_no_sentinel(t.level_frames[level], name);
    if (lower(t.level_frames[level]).find(role_phrase(level)) == std::string::npos) {
      throw Error(ErrorCode::TemplateError,
                  name + " must mention the role '" + std::string(role_phrase(level)) + "'");
    }
  }
  for (auto p : kAllPerspectives) {
    const auto name = "perspective_" + lower(to_string(p)) + ".txt";
    t.perspective_frames[p] = read_file(dir / name);
    check_no_sentinel(t.perspective_frames[p], name);
  }
  for (auto level : kAllLevels) {
    for (auto p : kAllPerspectives) {
      const auto name = "steps_" + lower(to_string(level)) + "_" + lower(to_string(p)) + ".txt";
      auto steps = read_steps(dir / name);
      for (const auto& s : steps) check_no_sentinel(s, name);
      t.steps[{level, p}] = std::move(steps);
    }
  }
  t.output_instruction = read_file(dir / "output_instruction.txt");
  check_sentinels_once(t.output_instruction, "output_instruction.txt");
  t.generic_cot_frame = read_file(dir / "generic_cot.txt");
  check_no_sentinel(t.generic_cot_frame, "generic_cot.txt");
  t.generic_cot_steps = read_steps(dir / "generic_cot_steps.txt");
  for (const auto& s : t.generic_cot_steps) check_no_sentinel(s, "generic_cot_steps.txt");
  t.baseline_frame = read_file(dir / "baseline.txt");
  check_no_sentinel(t.baseline_frame, "baseline.txt");
  return t;
}

std::filesystem::path default_template_dir() { return data_dir() / "templates"; }

const TemplateSet& default_templates() {
  static const TemplateSet templates = TemplateSet::load(default_template_dir());
  return templates;
}

CoTPrompt generate_prompt(const ErrorCategory& category, const KnowledgeRepository& knowledge,
                          ExpertiseLevel level, Perspective perspective,
                          const TemplateSet& templates, const PromptOptions& options) {
  Context ctx = base_context(category, options);
  ctx.emplace("definitions", join(knowledge.definitions, "; "));
  ctx.emplace("normal_indicators", join(knowledge.normal_indicators, "; "));
  ctx.emplace("error_indicators", join(knowledge.error_indicators, "; "));
  ctx.emplace("focus_areas", join(knowledge.focus_areas, "; "));

  CoTPrompt prompt;
  prompt.kind = PromptKind::Agent;
  prompt.error_id = category.id;
  prompt.level = level;
  prompt.perspective = perspective;
  prompt.system_text =
      substitute(templates.level_frames.at(level), ctx, "level frame") + "\n\n" +
      substitute(templates.perspective_frames.at(perspective), ctx, "perspective frame");
  for (const auto& step : templates.steps.at({level, perspective})) {
    prompt.reasoning_steps.push_back(substitute(step, ctx, "step list"));
  }
  prompt.output_instruction = render_output_instruction(templates, ctx);
  return prompt;
}

const CoTPrompt& PromptLibrary::at(const PromptKey& key) const {
  const auto it = prompts_.find(key);
  if (it == prompts_.end()) {
    throw Error(ErrorCode::UnknownErrorId, "no prompt for " + to_string(key));
  }
  return it->second;
}

PromptLibrary generate_library(const KnowledgeBase& kb, const TemplateSet& templates,
                               const PromptOptions& options) {
  std::map<PromptKey, CoTPrompt> prompts;
  for (const auto& [id, category] : kb.categories) {
    const auto& repo = kb.repositories.at(id);
    for (auto level : kAllLevels) {
      for (auto p : kAllPerspectives) {
        prompts.emplace(PromptKey{id, level, p},
                        generate_prompt(category, repo, level, p, templates, options));
      }
    }
  }
  return PromptLibrary(std::move(prompts));
}

CoTPrompt generic_cot_prompt(const ErrorCategory& category, const TemplateSet& templates,
                             const PromptOptions& options) {
  const Context ctx = base_context(category, options);
  CoTPrompt prompt;
  prompt.kind = PromptKind::GenericCoT;
  prompt.error_id = category.id;
  prompt.system_text = substitute(templates.generic_cot_frame, ctx, "generic_cot.txt");
  for (const auto& step : templates.generic_cot_steps) {
    prompt.reasoning_steps.push_back(substitute(step, ctx, "generic_cot_steps.txt"));
  }
  prompt.output_instruction = render_output_instruction(templates, ctx);
  return prompt;
}

CoTPrompt baseline_prompt(const ErrorCategory& category, const TemplateSet& templates,
                          const PromptOptions& options) {
  const Context ctx = base_context(category, options);
  CoTPrompt prompt;
  prompt.kind = PromptKind::Baseline;
  prompt.error_id = category.id;
  prompt.system_text = substitute(templates.baseline_frame, ctx, "baseline.txt");
  prompt.output_instruction = render_output_instruction(templates, ctx);
  return prompt;
}

}  // namespace cares

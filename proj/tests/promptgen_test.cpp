#include "cares/promptgen.hpp"

#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace cares {
namespace {

const KnowledgeBase& kb() {
  static const KnowledgeBase instance = load_knowledge_base(default_kb_path());
  return instance;
}

bool contains(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

bool embeds_any(const std::string& text, const std::vector<std::string>& entries) {
  for (const auto& e : entries) {
    if (contains(text, e)) return true;
  }
  return false;
}

/// Copy of the default templates in a temp dir, so single files can be broken.
class TemplateCopy {
 public:
  TemplateCopy() {
    std::filesystem::copy(default_template_dir(), dir_.path() / "t",
                          std::filesystem::copy_options::recursive);
  }
  std::filesystem::path path() const { return dir_.path() / "t"; }
  void write(const std::string& name, const std::string& content) const {
    test::write_file(path() / name, content);
  }

 private:
  test::TempDir dir_;
};

TEST(PromptLibrary, HasFiftyFourDistinctPrompts) {
  const auto library = generate_library(kb());
  ASSERT_EQ(library.size(), 54u);
  std::set<std::string> rendered;
  for (const auto& [key, prompt] : library.prompts()) rendered.insert(prompt.render());
  EXPECT_EQ(rendered.size(), 54u);
}

TEST(PromptLibrary, EveryPromptEmbedsAllFourKnowledgeFields) {
  const auto library = generate_library(kb());
  for (const auto& [key, prompt] : library.prompts()) {
    const auto& repo = kb().repositories.at(key.error_id);
    const auto text = prompt.render();
    EXPECT_TRUE(embeds_any(text, repo.definitions)) << to_string(key);
    EXPECT_TRUE(embeds_any(text, repo.normal_indicators)) << to_string(key);
    EXPECT_TRUE(embeds_any(text, repo.error_indicators)) << to_string(key);
    EXPECT_TRUE(embeds_any(text, repo.focus_areas)) << to_string(key);
  }
}

TEST(PromptLibrary, RolePhraseAndSentinelsPerPrompt) {
  const auto library = generate_library(kb());
  for (const auto& [key, prompt] : library.prompts()) {
    EXPECT_EQ(prompt.kind, PromptKind::Agent);
    EXPECT_EQ(prompt.level, key.level);
    EXPECT_EQ(prompt.perspective, key.perspective);
    EXPECT_TRUE(contains(prompt.system_text, std::string(role_phrase(key.level)))) << to_string(key);
    const auto text = prompt.render();
    EXPECT_EQ(count_occurrences(text, kSentinelError), 1u) << to_string(key);
    EXPECT_EQ(count_occurrences(text, kSentinelNoError), 1u) << to_string(key);
    EXPECT_TRUE(contains(prompt.output_instruction, std::string(kSentinelNoError)));
    EXPECT_FALSE(contains(prompt.system_text, "ASSESSMENT:"));
    EXPECT_FALSE(contains(text, "{")) << "unresolved placeholder in " << to_string(key);
    EXPECT_TRUE(contains(text, kb().categories.at(key.error_id).name));
  }
}

TEST(PromptLibrary, LevelsDifferInReasoningStructure) {
  const auto library = generate_library(kb());
  for (int e = 1; e <= 6; ++e) {
    for (auto p : kAllPerspectives) {
      const auto& r = library.at(e, ExpertiseLevel::Resident, p);
      const auto& a = library.at(e, ExpertiseLevel::Attending, p);
      const auto& x = library.at(e, ExpertiseLevel::Expert, p);
      EXPECT_NE(r.reasoning_steps, a.reasoning_steps);
      EXPECT_NE(a.reasoning_steps, x.reasoning_steps);
      EXPECT_NE(r.reasoning_steps, x.reasoning_steps);
    }
  }
  const auto& expert_temporal = library.at(1, ExpertiseLevel::Expert, Perspective::Temporal);
  EXPECT_TRUE(contains(expert_temporal.user_text(), "timing and sequence"));
}

TEST(PromptLibrary, UserTextNumbersStepsThenInstruction) {
  const auto library = generate_library(kb());
  const auto& prompt = library.at(3, ExpertiseLevel::Attending, Perspective::Spatial);
  const auto user = prompt.user_text();
  ASSERT_FALSE(prompt.reasoning_steps.empty());
  EXPECT_EQ(user.rfind("1. " + prompt.reasoning_steps.front(), 0), 0u);
  const auto n = std::to_string(prompt.reasoning_steps.size());
  EXPECT_TRUE(contains(user, n + ". " + prompt.reasoning_steps.back()));
  EXPECT_TRUE(user.ends_with(prompt.output_instruction));
  EXPECT_EQ(prompt.render(), prompt.system_text + "\n\n" + user);
}

TEST(PromptLibrary, FrameCountIsSubstituted) {
  const auto& cat = kb().categories.at(2);
  const auto& repo = kb().repositories.at(2);
  const auto eight = generate_prompt(cat, repo, ExpertiseLevel::Resident, Perspective::Temporal);
  const auto sixteen = generate_prompt(cat, repo, ExpertiseLevel::Resident, Perspective::Temporal,
                                       default_templates(), PromptOptions{16});
  EXPECT_TRUE(contains(eight.render(), "8 frames"));
  EXPECT_TRUE(contains(sixteen.render(), "16 frames"));
}

TEST(PromptLibrary, LookupOfUnknownKeyThrows) {
  const auto library = generate_library(kb());
  EXPECT_CARES_ERROR(library.at(7, ExpertiseLevel::Expert, Perspective::Spatial),
                     ErrorCode::UnknownErrorId);
}

TEST(PromptLibrary, KnowledgeEditsFlowIntoPrompts) {
  auto edited = kb();
  edited.repositories.at(5).error_indicators.push_back("Thread wrapped twice around the jaw");
  const auto library = generate_library(edited);
  for (auto l : kAllLevels) {
    for (auto p : kAllPerspectives) {
      EXPECT_TRUE(contains(library.at(5, l, p).render(), "Thread wrapped twice around the jaw"));
    }
  }
}

TEST(SingleAgentPrompts, GenericCoTCarriesNoDomainKnowledge) {
  const auto& cat = kb().categories.at(4);
  const auto prompt = generic_cot_prompt(cat);
  EXPECT_EQ(prompt.kind, PromptKind::GenericCoT);
  EXPECT_FALSE(prompt.level.has_value());
  ASSERT_EQ(prompt.reasoning_steps.size(), 1u);
  EXPECT_TRUE(contains(prompt.reasoning_steps.front(), "think step by step"));
  const auto text = prompt.render();
  EXPECT_TRUE(contains(text, cat.name));
  EXPECT_TRUE(contains(text, cat.description));
  const auto& repo = kb().repositories.at(4);
  EXPECT_FALSE(embeds_any(text, repo.error_indicators));
  EXPECT_FALSE(embeds_any(text, repo.focus_areas));
  EXPECT_EQ(count_occurrences(text, kSentinelNoError), 1u);
}

TEST(SingleAgentPrompts, BaselineHasNoReasoningSteps) {
  const auto& cat = kb().categories.at(1);
  const auto prompt = baseline_prompt(cat);
  EXPECT_EQ(prompt.kind, PromptKind::Baseline);
  EXPECT_TRUE(prompt.reasoning_steps.empty());
  EXPECT_TRUE(contains(prompt.render(), cat.description));
  EXPECT_EQ(count_occurrences(prompt.render(), kSentinelNoError), 1u);
}

TEST(Templates, UnknownPlaceholderIsRejected) {
  TemplateCopy copy;
  copy.write("steps_resident_spatial.txt", "Checklist: inspect {error_indicators}\nCheck {bogus}\n");
  const auto templates = TemplateSet::load(copy.path());
  EXPECT_CARES_ERROR(generate_library(kb(), templates), ErrorCode::TemplateError);
}

TEST(Templates, MissingFileIsRejected) {
  TemplateCopy copy;
  std::filesystem::remove(copy.path() / "level_expert.txt");
  EXPECT_CARES_ERROR(TemplateSet::load(copy.path()), ErrorCode::TemplateError);
}

TEST(Templates, RolePhraseIsRequired) {
  TemplateCopy copy;
  copy.write("level_attending.txt", "You are a careful reviewer.");
  EXPECT_CARES_ERROR(TemplateSet::load(copy.path()), ErrorCode::TemplateError);
}

TEST(Templates, SentinelContractIsEnforced) {
  {
    TemplateCopy copy;
    copy.write("output_instruction.txt", "Answer ASSESSMENT: ERROR for {error_name}.\n");
    EXPECT_CARES_ERROR(TemplateSet::load(copy.path()), ErrorCode::TemplateError);
  }
  {
    TemplateCopy copy;
    copy.write("perspective_spatial.txt",
               "Spatial view of {definitions} {normal_indicators} {error_indicators} "
               "{focus_areas}. Say ASSESSMENT: NO_ERROR if unsure.");
    EXPECT_CARES_ERROR(TemplateSet::load(copy.path()), ErrorCode::TemplateError);
  }
}

TEST(PromptNames, RoundTrip) {
  for (auto l : kAllLevels) {
    EXPECT_EQ(parse_level(to_string(l)), l);
    EXPECT_EQ(parse_level(std::string(1, code(l))), l);
  }
  for (auto p : kAllPerspectives) {
    EXPECT_EQ(parse_perspective(to_string(p)), p);
    EXPECT_EQ(parse_perspective(std::string(1, code(p))), p);
  }
  EXPECT_FALSE(parse_level("Fellow").has_value());
  EXPECT_EQ(to_string(PromptKey{3, ExpertiseLevel::Expert, Perspective::Temporal}),
            "e3/Expert/Temporal");
}

TEST(PromptNames, CountOccurrences) {
  EXPECT_EQ(count_occurrences("aaaa", "aa"), 2u);
  EXPECT_EQ(count_occurrences("abc", "d"), 0u);
  EXPECT_EQ(count_occurrences("", "a"), 0u);
}

}  // namespace
}  // namespace cares

#include "cares/knowledge.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace cares {
namespace {

nlohmann::json default_doc() {
  return nlohmann::json::parse(test::read_file(test::source_dir() / "kb" / "default.json"));
}

nlohmann::json& entry(nlohmann::json& doc, int id) {
  for (auto& e : doc["errors"]) {
    if (e["id"] == id) return e;
  }
  throw std::logic_error("no entry");
}

TEST(KnowledgeBase, DefaultLoadsAllSixTypes) {
  const auto kb = load_knowledge_base(default_kb_path());
  ASSERT_EQ(kb.categories.size(), 6u);
  ASSERT_EQ(kb.repositories.size(), 6u);
  ASSERT_EQ(kb.risk_profiles.size(), 6u);
  EXPECT_EQ(kb.categories.at(1).name, "Multiple Attempts");
  EXPECT_EQ(kb.categories.at(2).name, "Out of View");
  EXPECT_EQ(kb.categories.at(3).name, "Needle Handling");
  EXPECT_EQ(kb.categories.at(4).name, "Tissue Handling");
  EXPECT_EQ(kb.categories.at(5).name, "Suture Handling");
  EXPECT_EQ(kb.categories.at(6).name, "Instrument Control");
  for (const auto& [id, repo] : kb.repositories) {
    EXPECT_EQ(repo.error_id, id);
    EXPECT_FALSE(repo.definitions.empty());
    EXPECT_FALSE(repo.normal_indicators.empty());
    EXPECT_FALSE(repo.error_indicators.empty());
    EXPECT_FALSE(repo.focus_areas.empty());
  }
}

TEST(KnowledgeBase, DefaultRiskGradesCoverEveryPathway) {
  const auto kb = load_knowledge_base(default_kb_path());
  const std::map<int, std::pair<int, int>> expected = {
      {1, {1, 1}}, {2, {1, 2}}, {3, {2, 2}}, {4, {2, 3}}, {5, {2, 2}}, {6, {3, 3}}};
  for (const auto& [id, grades] : expected) {
    EXPECT_EQ(kb.risk_profiles.at(id).tis, grades.first) << "e" << id;
    EXPECT_EQ(kb.risk_profiles.at(id).cis, grades.second) << "e" << id;
  }
}

TEST(KnowledgeBase, JsonRoundTrip) {
  const auto kb = load_knowledge_base(default_kb_path());
  EXPECT_EQ(parse_knowledge_base(to_json(kb)), kb);
  EXPECT_EQ(parse_knowledge_base(to_json(kb).dump()), kb);
}

TEST(KnowledgeBase, LookupReturnsAllParts) {
  const auto kb = load_knowledge_base(default_kb_path());
  const auto rec = lookup(kb, 4);
  EXPECT_EQ(rec.category.id, 4);
  EXPECT_EQ(rec.repository.error_id, 4);
  EXPECT_EQ(rec.risk.tis, 2);
  EXPECT_EQ(rec.risk.cis, 3);
  EXPECT_CARES_ERROR(lookup(kb, 0), ErrorCode::UnknownErrorId);
  EXPECT_CARES_ERROR(lookup(kb, 7), ErrorCode::UnknownErrorId);
}

TEST(KnowledgeBase, StringsAreTrimmed) {
  auto doc = default_doc();
  entry(doc, 2)["name"] = "  Out of View \t";
  entry(doc, 2)["definitions"][0] = "\n padded definition  ";
  const auto kb = parse_knowledge_base(doc);
  EXPECT_EQ(kb.categories.at(2).name, "Out of View");
  EXPECT_EQ(kb.repositories.at(2).definitions.front(), "padded definition");
}

TEST(KnowledgeBase, MissingCategoryIsRejected) {
  auto doc = default_doc();
  doc["errors"].erase(doc["errors"].begin() + 2);
  EXPECT_CARES_ERROR(parse_knowledge_base(doc), ErrorCode::MissingCategory);
}

TEST(KnowledgeBase, EmptyFieldsAreRejected) {
  for (const char* field : {"definitions", "normal_indicators", "error_indicators", "focus_areas"}) {
    auto doc = default_doc();
    entry(doc, 3)[field] = nlohmann::json::array();
    EXPECT_CARES_ERROR(parse_knowledge_base(doc), ErrorCode::EmptyField);
  }
  auto blank_item = default_doc();
  entry(blank_item, 5)["focus_areas"][1] = "   ";
  EXPECT_CARES_ERROR(parse_knowledge_base(blank_item), ErrorCode::EmptyField);

  auto blank_name = default_doc();
  entry(blank_name, 1)["name"] = "";
  EXPECT_CARES_ERROR(parse_knowledge_base(blank_name), ErrorCode::EmptyField);
}

TEST(KnowledgeBase, RiskGradesOutsideOneToThreeAreRejected) {
  for (const nlohmann::json& bad : {nlohmann::json(0), nlohmann::json(4), nlohmann::json(-1),
                                    nlohmann::json(1.5)}) {
    auto tis = default_doc();
    entry(tis, 6)["tis"] = bad;
    EXPECT_CARES_ERROR(parse_knowledge_base(tis), ErrorCode::InvalidRisk);
    auto cis = default_doc();
    entry(cis, 1)["cis"] = bad;
    EXPECT_CARES_ERROR(parse_knowledge_base(cis), ErrorCode::InvalidRisk);
  }
}

TEST(KnowledgeBase, MalformedDocumentsAreRejected) {
  EXPECT_CARES_ERROR(parse_knowledge_base(std::string("{ not json")), ErrorCode::MalformedFile);
  EXPECT_CARES_ERROR(parse_knowledge_base(nlohmann::json::array()), ErrorCode::MalformedFile);

  auto dup = default_doc();
  entry(dup, 2)["id"] = 1;
  EXPECT_CARES_ERROR(parse_knowledge_base(dup), ErrorCode::MalformedFile);

  auto out_of_range = default_doc();
  entry(out_of_range, 6)["id"] = 9;
  EXPECT_CARES_ERROR(parse_knowledge_base(out_of_range), ErrorCode::MalformedFile);

  auto string_grade = default_doc();
  entry(string_grade, 2)["tis"] = "2";
  EXPECT_CARES_ERROR(parse_knowledge_base(string_grade), ErrorCode::MalformedFile);

  auto wrong_type = default_doc();
  entry(wrong_type, 4)["definitions"] = "a single string";
  EXPECT_CARES_ERROR(parse_knowledge_base(wrong_type), ErrorCode::MalformedFile);

  EXPECT_CARES_ERROR(load_knowledge_base("/nonexistent/kb.json"), ErrorCode::MalformedFile);
}

TEST(KnowledgeBase, EditedFileTakesEffectWithoutRebuild) {
  test::TempDir dir;
  auto doc = default_doc();
  entry(doc, 1)["tis"] = 3;
  entry(doc, 1)["error_indicators"].push_back("A freshly added indicator");
  test::write_file(dir / "kb.json", doc.dump(2));
  const auto kb = load_knowledge_base(dir / "kb.json");
  EXPECT_EQ(kb.risk_profiles.at(1).tis, 3);
  EXPECT_EQ(kb.repositories.at(1).error_indicators.back(), "A freshly added indicator");
}

}  // namespace
}  // namespace cares

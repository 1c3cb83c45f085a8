#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cares {

inline constexpr int kNumErrorTypes = 6;

struct ErrorCategory {
  int id = 0;
  std::string name;
  std::string description;

  bool operator==(const ErrorCategory&) const = default;
};

/// Clinical knowledge for one error type: definitions (D), normal technique
/// indicators (N), error indicators (I) and assessment focus areas (F).
struct KnowledgeRepository {
  int error_id = 0;
  std::vector<std::string> definitions;
  std::vector<std::string> normal_indicators;
  std::vector<std::string> error_indicators;
  std::vector<std::string> focus_areas;

  bool operator==(const KnowledgeRepository&) const = default;
};

/// Technical intricacy and clinical impact, each graded 1..3.
struct RiskProfile {
  int error_id = 0;
  int tis = 1;
  int cis = 1;

  bool operator==(const RiskProfile&) const = default;
};

struct KnowledgeRecord {
  ErrorCategory category;
  KnowledgeRepository repository;
  RiskProfile risk;
};

/// Immutable after load; the three maps always share the key set {1..6}.
struct KnowledgeBase {
  std::map<int, ErrorCategory> categories;
  std::map<int, KnowledgeRepository> repositories;
  std::map<int, RiskProfile> risk_profiles;

  bool operator==(const KnowledgeBase&) const = default;
};

/// Validates a parsed knowledge document. Throws cares::Error naming the
/// offending error id and field.
KnowledgeBase parse_knowledge_base(const nlohmann::json& doc);
KnowledgeBase parse_knowledge_base(const std::string& text);
KnowledgeBase load_knowledge_base(const std::filesystem::path& path);

nlohmann::json to_json(const KnowledgeBase& kb);

/// Throws UnknownErrorId for ids outside 1..6.
KnowledgeRecord lookup(const KnowledgeBase& kb, int error_id);

/// Root holding kb/, templates/ and fixtures/. CARES_DATA_DIR overrides the
/// source-tree default.
std::filesystem::path data_dir();
std::filesystem::path default_kb_path();

}  // namespace cares

#include "cares/knowledge.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "cares/error.hpp"

#ifndef CARES_SOURCE_DATA_DIR
#define CARES_SOURCE_DATA_DIR "."
#endif

namespace cares {
namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

std::string where(int id, const std::string& field) {
  std::ostringstream os;
  os << "error " << id << ", field '" << field << "'";
  return os.str();
}

const json& require(const json& entry, int id, const char* field) {
  if (!entry.contains(field)) {
    throw Error(ErrorCode::MalformedFile, where(id, field) + " is missing");
  }
  return entry.at(field);
}

std::string read_string(const json& entry, int id, const char* field) {
  const json& v = require(entry, id, field);
  if (!v.is_string()) {
    throw Error(ErrorCode::MalformedFile, where(id, field) + " must be a string");
  }
  std::string s = trim(v.get<std::string>());
  if (s.empty()) {
    throw Error(ErrorCode::EmptyField, where(id, field) + " is empty");
  }
  return s;
}

std::vector<std::string> read_list(const json& entry, int id, const char* field) {
  const json& v = require(entry, id, field);
  if (!v.is_array()) {
    throw Error(ErrorCode::MalformedFile, where(id, field) + " must be an array");
  }
  if (v.empty()) {
    throw Error(ErrorCode::EmptyField, where(id, field) + " has no entries");
  }
  std::vector<std::string> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) {
      throw Error(ErrorCode::MalformedFile,
                  where(id, field) + " entry " + std::to_string(i) + " must be a string");
    }
    std::string s = trim(v[i].get<std::string>());
    if (s.empty()) {
      throw Error(ErrorCode::EmptyField,
                  where(id, field) + " entry " + std::to_string(i) + " is empty");
    }
    out.push_back(std::move(s));
  }
  return out;
}

int read_grade(const json& entry, int id, const char* field) {
  const json& v = require(entry, id, field);
  if (!v.is_number()) {
    throw Error(ErrorCode::MalformedFile, where(id, field) + " must be a number");
  }
  if (!v.is_number_integer()) {
    throw Error(ErrorCode::InvalidRisk, where(id, field) + " must be an integer in 1..3");
  }
  const auto grade = v.get<long long>();
  if (grade < 1 || grade > 3) {
    throw Error(ErrorCode::InvalidRisk,
                where(id, field) + " = " + std::to_string(grade) + " outside 1..3");
  }
  return static_cast<int>(grade);
}

}  // namespace

KnowledgeBase parse_knowledge_base(const json& doc) {
  if (!doc.is_object() || !doc.contains("errors") || !doc.at("errors").is_array()) {
    throw Error(ErrorCode::MalformedFile, "expected an object with an array 'errors'");
  }
  KnowledgeBase kb;
  for (const json& entry : doc.at("errors")) {
    if (!entry.is_object()) {
      throw Error(ErrorCode::MalformedFile, "'errors' elements must be objects");
    }
    if (!entry.contains("id") || !entry.at("id").is_number_integer()) {
      throw Error(ErrorCode::MalformedFile, "error entry without an integer 'id'");
    }
    const auto raw_id = entry.at("id").get<long long>();
    if (raw_id < 1 || raw_id > kNumErrorTypes) {
      throw Error(ErrorCode::MalformedFile,
                  "error id " + std::to_string(raw_id) + " outside 1..6");
    }
    const int id = static_cast<int>(raw_id);
    if (kb.categories.count(id) != 0) {
      throw Error(ErrorCode::MalformedFile, "error id " + std::to_string(id) + " appears twice");
    }

    ErrorCategory category{id, read_string(entry, id, "name"),
                           read_string(entry, id, "description")};
    KnowledgeRepository repo{id,
                             read_list(entry, id, "definitions"),
                             read_list(entry, id, "normal_indicators"),
                             read_list(entry, id, "error_indicators"),
                             read_list(entry, id, "focus_areas")};
    RiskProfile risk{id, read_grade(entry, id, "tis"), read_grade(entry, id, "cis")};

    kb.categories.emplace(id, std::move(category));
    kb.repositories.emplace(id, std::move(repo));
    kb.risk_profiles.emplace(id, risk);
  }
  if (kb.categories.size() != static_cast<std::size_t>(kNumErrorTypes)) {
    std::string missing;
    for (int id = 1; id <= kNumErrorTypes; ++id) {
      if (kb.categories.count(id) == 0) {
        missing += (missing.empty() ? "" : ",") + std::to_string(id);
      }
    }
    throw Error(ErrorCode::MissingCategory, "no entry for error id(s) " + missing);
  }
  return kb;
}

KnowledgeBase parse_knowledge_base(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedFile, e.what());
  }
  return parse_knowledge_base(doc);
}

KnowledgeBase load_knowledge_base(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::MalformedFile, "cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_knowledge_base(buf.str());
}

nlohmann::json to_json(const KnowledgeBase& kb) {
  json errors = json::array();
  for (const auto& [id, category] : kb.categories) {
    const auto& repo = kb.repositories.at(id);
    const auto& risk = kb.risk_profiles.at(id);
    errors.push_back({
        {"id", id},
        {"name", category.name},
        {"description", category.description},
        {"definitions", repo.definitions},
        {"normal_indicators", repo.normal_indicators},
        {"error_indicators", repo.error_indicators},
        {"focus_areas", repo.focus_areas},
        {"tis", risk.tis},
        {"cis", risk.cis},
    });
  }
  return json{{"errors", errors}};
}

KnowledgeRecord lookup(const KnowledgeBase& kb, int error_id) {
  const auto it = kb.categories.find(error_id);
  if (error_id < 1 || error_id > kNumErrorTypes || it == kb.categories.end()) {
    throw Error(ErrorCode::UnknownErrorId, "error id " + std::to_string(error_id));
  }
  return {it->second, kb.repositories.at(error_id), kb.risk_profiles.at(error_id)};
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("CARES_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return CARES_SOURCE_DATA_DIR;
}

std::filesystem::path default_kb_path() { return data_dir() / "kb" / "default.json"; }

}  // namespace cares

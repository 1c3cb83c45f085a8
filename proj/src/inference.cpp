#include "cares/inference.hpp"

#include <cctype>
#include <charconv>

#include "cares/error.hpp"

namespace cares {

void GenerationParams::validate() const {
  if (max_tokens <= 0) throw Error(ErrorCode::ConfigError, "max_tokens must be positive");
  if (top_k <= 0) throw Error(ErrorCode::ConfigError, "top_k must be positive");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(ErrorCode::ConfigError, "top_p must be in (0, 1]");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::ConfigError, "temperature must be >= 0");
}

std::optional<Perspective> RequestTag::perspective() const {
  if (agent.size() != 3 || agent[1] != '-') return std::nullopt;
  return parse_perspective(agent.substr(2, 1));
}

std::optional<ExpertiseLevel> RequestTag::level() const {
  if (agent.size() != 3 || agent[1] != '-') return std::nullopt;
  return parse_level(agent.substr(0, 1));
}

std::string agent_code(ExpertiseLevel level, Perspective perspective) {
  return std::string{code(level), '-', code(perspective)};
}

std::string format_request_id(const RequestTag& tag) {
  return tag.video_id + "/c" + std::to_string(tag.clip_index) + "/e" +
         std::to_string(tag.error_id) + "/" + tag.agent;
}

std::optional<RequestTag> parse_request_id(std::string_view id) {
  // Split from the right so the video id is everything before the last three parts.
  std::string_view parts[3];
  for (int i = 2; i >= 0; --i) {
    const auto slash = id.rfind('/');
    if (slash == std::string_view::npos) return std::nullopt;
    parts[i] = id.substr(slash + 1);
    id = id.substr(0, slash);
  }
  if (id.empty()) return std::nullopt;
  auto parse_num = [](std::string_view s, char prefix, int& out) {
    if (s.size() < 2 || s.front() != prefix) return false;
    const auto* first = s.data() + 1;
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
  };
  RequestTag tag;
  tag.video_id = std::string(id);
  if (!parse_num(parts[0], 'c', tag.clip_index) || !parse_num(parts[1], 'e', tag.error_id)) {
    return std::nullopt;
  }
  if (parts[2].empty()) return std::nullopt;
  tag.agent = std::string(parts[2]);
  return tag;
}

InferenceRequest build_request(const CoTPrompt& prompt, std::vector<EncodedImage> frames,
                               const GenerationParams& params, std::string request_id) {
  if (frames.empty()) {
    throw Error(ErrorCode::EmptyFrames, "request " + request_id + " has no frames");
  }
  params.validate();
  InferenceRequest request;
  request.system_text = prompt.system_text;
  request.user_text = prompt.user_text();
  request.frames = std::move(frames);
  request.params = params;
  request.request_id = std::move(request_id);
  return request;
}

std::string_view to_string(ParseStatus status) noexcept {
  return status == ParseStatus::Clean ? "Clean" : "Fallback";
}

Verdict parse_verdict(std::string_view text, FallbackPolicy policy) {
  constexpr std::string_view kKey = "ASSESSMENT:";
  auto upper = [](char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); };
  auto matches_at = [&](std::size_t pos, std::string_view word) {
    if (pos + word.size() > text.size()) return false;
    for (std::size_t i = 0; i < word.size(); ++i) {
      if (upper(text[pos + i]) != word[i]) return false;
    }
    const std::size_t end = pos + word.size();
    if (end == text.size()) return true;
    const auto next = static_cast<unsigned char>(text[end]);
    return !(std::isalnum(next) || next == '_');
  };

  std::optional<int> decision;
  for (std::size_t pos = 0; pos + kKey.size() <= text.size(); ++pos) {
    bool key = true;
    for (std::size_t i = 0; i < kKey.size() && key; ++i) {
      key = upper(text[pos + i]) == kKey[i];
    }
    if (!key) continue;
    std::size_t v = pos + kKey.size();
    while (v < text.size() && (text[v] == ' ' || text[v] == '\t' || text[v] == '*')) ++v;
    if (matches_at(v, "NO_ERROR")) {
      decision = 0;
    } else if (matches_at(v, "ERROR")) {
      decision = 1;
    }
  }

  if (decision) {
    return Verdict{*decision, std::string(text), ParseStatus::Clean};
  }
  if (policy == FallbackPolicy::ErrorOut) {
    throw Error(ErrorCode::UnparseableResponse, "no verdict sentinel in response");
  }
  return Verdict{0, std::string(text), ParseStatus::Fallback};
}

}  // namespace cares

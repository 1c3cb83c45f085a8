#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "cares/error.hpp"
#include "cares/inference.hpp"

namespace cares {
namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return (v != nullptr && *v != '\0') ? std::string(v) : std::move(fallback);
}

bool transient_status(int status) { return status == 429 || status >= 500; }

}  // namespace

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig config;
  config.url = env_or("CARES_BACKEND_URL", config.url);
  config.api_key = env_or("CARES_BACKEND_KEY", config.api_key);
  config.model = env_or("CARES_BACKEND_MODEL", config.model);
  return config;
}

std::string base64_encode(std::string_view bytes) {
  static constexpr char kTable[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const auto n = (static_cast<unsigned char>(bytes[i]) << 16) |
                   (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                   static_cast<unsigned char>(bytes[i + 2]);
    out += kTable[(n >> 18) & 63];
    out += kTable[(n >> 12) & 63];
    out += kTable[(n >> 6) & 63];
    out += kTable[n & 63];
  }
  if (const auto rest = bytes.size() - i; rest > 0) {
    auto n = static_cast<unsigned char>(bytes[i]) << 16;
    if (rest == 2) n |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out += kTable[(n >> 18) & 63];
    out += kTable[(n >> 12) & 63];
    out += rest == 2 ? kTable[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

nlohmann::json remote_request_body(const InferenceRequest& request, const std::string& model) {
  nlohmann::json content = nlohmann::json::array();
  content.push_back({{"type", "text"}, {"text", request.user_text}});
  for (const auto& frame : request.frames) {
    content.push_back(
        {{"type", "image_url"},
         {"image_url",
          {{"url", "data:" + frame.mime_type + ";base64," + base64_encode(frame.bytes)}}}});
  }
  return {
      {"model", model},
      {"messages",
       nlohmann::json::array({
           {{"role", "system"}, {"content", request.system_text}},
           {{"role", "user"}, {"content", content}},
       })},
      {"max_tokens", request.params.max_tokens},
      {"top_k", request.params.top_k},
      {"top_p", request.params.top_p},
      {"temperature", request.params.temperature},
  };
}

std::string parse_remote_response(const std::string& body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::BackendUnavailable, std::string("response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() ||
      doc["choices"].empty()) {
    throw Error(ErrorCode::BackendUnavailable, "response has no choices");
  }
  const auto& message = doc["choices"][0].value("message", nlohmann::json::object());
  const auto content = message.value("content", nlohmann::json());
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string text;
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text") {
        text += part.value("text", "");
      }
    }
    return text;
  }
  throw Error(ErrorCode::BackendUnavailable, "first choice has no message content");
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  if (config_.url.empty()) {
    throw Error(ErrorCode::ConfigError, "remote backend needs a URL (CARES_BACKEND_URL)");
  }
  if (config_.max_attempts < 1) {
    throw Error(ErrorCode::ConfigError, "max_attempts must be at least 1");
  }
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::ConfigError, "backend URL must include a scheme: " + config_.url);
  }
  const auto path_start = config_.url.find('/', scheme_end + 3);
  origin_ = config_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
}

std::string RemoteBackend::submit(const InferenceRequest& request) {
  const std::string body = remote_request_body(request, config_.model).dump();
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  std::string last_error;
  auto backoff = config_.initial_backoff;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    // httplib clients are not shareable across threads; one per call.
    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto result = client.Post(path_, headers, body, "application/json");
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status == 200) {
      return parse_remote_response(result->body);
    }
    last_error = "HTTP " + std::to_string(result->status);
    if (!transient_status(result->status)) break;
  }
  throw Error(ErrorCode::BackendUnavailable,
              "request " + request.request_id + " failed: " + last_error);
}

}  // namespace cares

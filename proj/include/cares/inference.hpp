#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cares/promptgen.hpp"

namespace cares {

struct GenerationParams {
  int max_tokens = 1024;
  int top_k = 40;
  double top_p = 0.8;
  double temperature = 0.8;

  /// Throws ConfigError unless max_tokens > 0, top_k > 0, top_p in (0, 1]
  /// and temperature >= 0.
  void validate() const;
};

struct EncodedImage {
  std::string mime_type = "image/jpeg";
  std::string bytes;
  /// Where the frame came from, e.g. "v01/frame_000120.jpg".
  std::string source;
};

struct InferenceRequest {
  std::string system_text;
  std::string user_text;
  std::vector<EncodedImage> frames;
  GenerationParams params;
  std::string request_id;
};

/// Structured form of the request ids the pipeline issues:
/// "<video_id>/c<clip_index>/e<error_id>/<agent>", where agent is "R-T",
/// "A-S", ... for pathway agents, or "baseline" / "single-cot".
struct RequestTag {
  std::string video_id;
  int clip_index = 0;
  int error_id = 0;
  std::string agent;

  std::optional<Perspective> perspective() const;
  std::optional<ExpertiseLevel> level() const;
};

std::string format_request_id(const RequestTag& tag);
std::optional<RequestTag> parse_request_id(std::string_view id);
std::string agent_code(ExpertiseLevel level, Perspective perspective);

/// Throws EmptyFrames when frames is empty.
InferenceRequest build_request(const CoTPrompt& prompt, std::vector<EncodedImage> frames,
                               const GenerationParams& params, std::string request_id);

/// Implementations must accept concurrent submit() calls.
class InferenceBackend {
 public:
  virtual ~InferenceBackend() = default;
  virtual std::string submit(const InferenceRequest& request) = 0;
};

enum class ParseStatus { Clean, Fallback };
enum class FallbackPolicy { ErrorOut, AssumeNoError };

std::string_view to_string(ParseStatus status) noexcept;

struct Verdict {
  int decision = 0;
  std::string trace;
  ParseStatus parse_status = ParseStatus::Clean;
};

/// Last sentinel in the text wins (case-insensitive). Without a sentinel the
/// policy decides: AssumeNoError gives decision 0 / Fallback, ErrorOut throws
/// UnparseableResponse.
Verdict parse_verdict(std::string_view text,
                      FallbackPolicy policy = FallbackPolicy::AssumeNoError);

// ---------------------------------------------------------------------------
// Deterministic mock

/// Uniform draw in [0, 1) that depends only on (seed, request_id).
double mock_draw(std::uint64_t seed, std::string_view request_id) noexcept;

/// Synthetic trace whose closing sentinel agrees with ground_truth when
/// mock_draw(seed, request_id) < accuracy.
std::string mock_submit(const InferenceRequest& request, int ground_truth, double accuracy,
                        std::uint64_t seed);

using GroundTruthOracle = std::function<int(const std::string& request_id)>;

struct MockConfig {
  std::uint64_t seed = 0;
  double accuracy = 1.0;
  /// Overrides for agents of one perspective, keyed by the request tag.
  std::map<Perspective, double> perspective_accuracy;

  double accuracy_for(const std::string& request_id) const;
};

class MockBackend final : public InferenceBackend {
 public:
  MockBackend(MockConfig config, GroundTruthOracle oracle);

  std::string submit(const InferenceRequest& request) override;
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  MockConfig config_;
  GroundTruthOracle oracle_;
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Remote chat-completions backend

struct RemoteConfig {
  std::string url;
  std::string api_key;
  std::string model = "qwen2.5-vl";
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::milliseconds timeout{120000};

  /// Reads CARES_BACKEND_URL, CARES_BACKEND_KEY, CARES_BACKEND_MODEL.
  static RemoteConfig from_env();
};

nlohmann::json remote_request_body(const InferenceRequest& request, const std::string& model);
/// Text of the first choice's message. Throws BackendUnavailable on a body
/// that does not have that shape.
std::string parse_remote_response(const std::string& body);
std::string base64_encode(std::string_view bytes);

class RemoteBackend final : public InferenceBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  /// Retries transport failures, 429 and 5xx up to max_attempts with
  /// exponential backoff, then throws BackendUnavailable.
  std::string submit(const InferenceRequest& request) override;

 private:
  RemoteConfig config_;
  std::string origin_;
  std::string path_;
};

}  // namespace cares

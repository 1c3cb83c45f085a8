#include "cares/inference.hpp"

#include <cstdio>

#include "cares/error.hpp"

namespace cares {
namespace {

// Counter-based generator: FNV-1a over the request id, mixed with the seed
// through SplitMix64 finalisers. No state, so completion order is irrelevant.
std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

double mock_draw(std::uint64_t seed, std::string_view request_id) noexcept {
  const std::uint64_t x = splitmix64(splitmix64(seed) ^ fnv1a64(request_id));
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

std::string mock_submit(const InferenceRequest& request, int ground_truth, double accuracy,
                        std::uint64_t seed) {
  const double draw = mock_draw(seed, request.request_id);
  const bool agree = draw < accuracy;
  const int emitted = agree ? ground_truth : 1 - ground_truth;
  char draw_text[32];
  std::snprintf(draw_text, sizeof draw_text, "%.6f", draw);
  std::string text = "Mock analysis for request " + request.request_id + ".\n";
  text += "Reviewed the sampled frames in order (draw " + std::string(draw_text) + ").\n";
  text += emitted == 1 ? "Evidence consistent with the error indicators was found.\n"
                       : "No evidence of the error indicators was found.\n";
  text += std::string(emitted == 1 ? kSentinelError : kSentinelNoError);
  return text;
}

double MockConfig::accuracy_for(const std::string& request_id) const {
  if (!perspective_accuracy.empty()) {
    if (auto tag = parse_request_id(request_id)) {
      if (auto p = tag->perspective()) {
        if (auto it = perspective_accuracy.find(*p); it != perspective_accuracy.end()) {
          return it->second;
        }
      }
    }
  }
  return accuracy;
}

MockBackend::MockBackend(MockConfig config, GroundTruthOracle oracle)
    : config_(std::move(config)), oracle_(std::move(oracle)) {
  auto check = [](double a) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw Error(ErrorCode::ConfigError, "mock accuracy must be in [0, 1]");
    }
  };
  check(config_.accuracy);
  for (const auto& [p, a] : config_.perspective_accuracy) check(a);
  if (!oracle_) throw Error(ErrorCode::ConfigError, "mock backend needs a ground-truth oracle");
}

std::string MockBackend::submit(const InferenceRequest& request) {
  ++calls_;
  const int truth = oracle_(request.request_id) != 0 ? 1 : 0;
  return mock_submit(request, truth, config_.accuracy_for(request.request_id), config_.seed);
}

}  // namespace cares

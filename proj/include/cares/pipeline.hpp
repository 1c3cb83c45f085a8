#pragma once

#include <array>
#include <atomic>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cares/data.hpp"
#include "cares/inference.hpp"
#include "cares/knowledge.hpp"
#include "cares/promptgen.hpp"
#include "cares/router.hpp"

namespace cares {

/// Ablation ladder, from single-prompt classification to the full
/// risk-routed weighted consensus.
enum class Mode { Baseline, SingleCoT, StaticCoT, DynamicMajority, FullCARES };

inline constexpr std::array<Mode, 5> kAllModes = {Mode::Baseline, Mode::SingleCoT,
                                                  Mode::StaticCoT, Mode::DynamicMajority,
                                                  Mode::FullCARES};

/// CLI spelling: baseline, single-cot, static-cot, dynamic-majority, full.
std::string_view to_string(Mode mode) noexcept;
std::optional<Mode> parse_mode(std::string_view s) noexcept;
/// Inference requests one (clip, error) task issues: 1, 1, 9, 3, 3.
int requests_per_task(Mode mode) noexcept;

struct AgentVerdict {
  /// Empty for the single-agent modes.
  std::optional<Perspective> perspective;
  std::optional<ExpertiseLevel> level;
  Verdict verdict;
  std::string prompt_key;
  std::string request_id;
};

struct ConsensusConfig {
  double alpha_t = 1.3;
  double alpha_s = 1.1;
  double alpha_p = 0.9;
  double theta = 2.25;
  /// Permits weights that break alpha_t > alpha_s > alpha_p (sweeps only).
  bool allow_unordered = false;

  /// Throws ConfigError for non-positive weights, OrderingViolation for
  /// unordered weights unless allow_unordered.
  void validate() const;
  double weight(Perspective p) const noexcept;
};

/// Scores are rounded to 1e-9 so decimal weights compare against decimal
/// thresholds the way they read (1.3 + 1.1 + 0.9 == 3.3).
double quantize_score(double score) noexcept;

/// Weighted sum of the three perspective verdicts. Throws MissingPerspective
/// or DuplicatePerspective unless there is exactly one verdict per
/// perspective.
double consensus_score(std::span<const AgentVerdict> verdicts, const ConsensusConfig& config);
double consensus_score(int temporal, int spatial, int procedural, const ConsensusConfig& config);

/// 1 iff score > theta.
int decide(double score, double theta) noexcept;

/// 1 iff strictly more than half the decisions are 1. Throws EvenPanel for an
/// even (or empty) panel.
int majority_vote(std::span<const int> decisions);
int majority_vote(std::span<const AgentVerdict> verdicts);

struct Detection {
  ClipWindow clip;
  int error_id = 0;
  Mode mode = Mode::FullCARES;
  std::optional<Pathway> pathway;
  std::vector<AgentVerdict> verdicts;
  std::optional<double> score;
  int decision = 0;
  /// Clip label from the annotations, when known.
  std::optional<int> label;
};

struct DetectorOptions {
  ConsensusConfig consensus;
  GenerationParams params;
  int frames_per_clip = 8;
  FallbackPolicy fallback = FallbackPolicy::AssumeNoError;
};

/// Runs the agents of one mode for a (clip, error type) task. Holds
/// references only; every referenced object must outlive it.
class Detector {
 public:
  Detector(const KnowledgeBase& kb, const PromptLibrary& library, const TemplateSet& templates,
           InferenceBackend& backend, FrameSource& frames, DetectorOptions options);

  /// One verdict per perspective at the pathway's expertise level.
  std::vector<AgentVerdict> run_pathway(const ClipWindow& clip, int error_id,
                                        Pathway pathway) const;
  Detection detect(const ClipWindow& clip, int error_id, Mode mode) const;

  const DetectorOptions& options() const noexcept { return options_; }

 private:
  std::vector<EncodedImage> load_frames(const ClipWindow& clip) const;
  AgentVerdict run_agent(const ClipWindow& clip, int error_id, const CoTPrompt& prompt,
                         const std::vector<EncodedImage>& frames, std::string agent,
                         std::string prompt_key) const;
  std::vector<AgentVerdict> run_level(const ClipWindow& clip, int error_id, ExpertiseLevel level,
                                      const std::vector<EncodedImage>& frames) const;

  const KnowledgeBase& kb_;
  const PromptLibrary& library_;
  const TemplateSet& templates_;
  InferenceBackend& backend_;
  FrameSource& frames_;
  DetectorOptions options_;
};

/// Recomputes score and decision of a FullCARES detection under a different
/// consensus configuration without new inference.
Detection rescore(const Detection& detection, const ConsensusConfig& config);

/// Mock ground truth derived from annotations via the request-id scheme.
GroundTruthOracle annotation_oracle(std::vector<AnnotationRecord> annotations);

struct DetectionTask {
  ClipWindow clip;
  int error_id = 0;
  std::optional<int> label;
};

struct SkippedTask {
  ClipWindow clip;
  int error_id = 0;
  std::string reason;
};

struct RunResult {
  /// Sorted by (video_id, clip index, error_id).
  std::vector<Detection> detections;
  std::vector<SkippedTask> skipped;
  std::size_t total_tasks = 0;
  bool interrupted = false;
};

/// One task per (clip, error) in `error_ids`, labelled from the annotations.
std::vector<DetectionTask> make_tasks(std::span<const VideoMeta> metas,
                                      std::span<const AnnotationRecord> annotations,
                                      std::span<const int> error_ids);

/// Processes tasks on `workers` threads. A failing task is recorded in
/// `skipped` and never aborts the run. When *stop becomes true no new tasks
/// are started.
RunResult run_tasks(const Detector& detector, std::span<const DetectionTask> tasks, Mode mode,
                    int workers, const std::atomic<bool>* stop = nullptr);

void sort_detections(std::vector<Detection>& detections);

nlohmann::json to_json(const Detection& detection, bool include_traces = true);
Detection detection_from_json(const nlohmann::json& record);

/// Newline-delimited JSON, one record per detection.
void write_detections(std::ostream& out, std::span<const Detection> detections,
                      bool include_traces = true);
/// Skips non-detection records such as the incomplete-run marker.
std::vector<Detection> read_detections(std::istream& in);

}  // namespace cares

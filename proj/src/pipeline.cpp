#include "cares/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <thread>
#include <tuple>

#include "cares/error.hpp"

namespace cares {

std::string_view to_string(Mode mode) noexcept {
  switch (mode) {
    case Mode::Baseline: return "baseline";
    case Mode::SingleCoT: return "single-cot";
    case Mode::StaticCoT: return "static-cot";
    case Mode::DynamicMajority: return "dynamic-majority";
    case Mode::FullCARES: return "full";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view s) noexcept {
  for (auto m : kAllModes) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

int requests_per_task(Mode mode) noexcept {
  switch (mode) {
    case Mode::Baseline:
    case Mode::SingleCoT: return 1;
    case Mode::StaticCoT: return 9;
    case Mode::DynamicMajority:
    case Mode::FullCARES: return 3;
  }
  return 0;
}

void ConsensusConfig::validate() const {
  if (!(alpha_t > 0.0 && alpha_s > 0.0 && alpha_p > 0.0)) {
    throw Error(ErrorCode::ConfigError, "consensus weights must be positive");
  }
  if (!std::isfinite(theta)) {
    throw Error(ErrorCode::ConfigError, "theta must be finite");
  }
  if (!allow_unordered && !(alpha_t > alpha_s && alpha_s > alpha_p)) {
    throw Error(ErrorCode::OrderingViolation,
                "weights must satisfy alpha_t > alpha_s > alpha_p (pass the ordering override "
                "for sweeps)");
  }
}

double ConsensusConfig::weight(Perspective p) const noexcept {
  switch (p) {
    case Perspective::Temporal: return alpha_t;
    case Perspective::Spatial: return alpha_s;
    case Perspective::Procedural: return alpha_p;
  }
  return 0.0;
}

double quantize_score(double score) noexcept { return std::round(score * 1e9) / 1e9; }

double consensus_score(int temporal, int spatial, int procedural, const ConsensusConfig& config) {
  return quantize_score(config.alpha_t * temporal + config.alpha_s * spatial +
                        config.alpha_p * procedural);
}

double consensus_score(std::span<const AgentVerdict> verdicts, const ConsensusConfig& config) {
  std::array<std::optional<int>, 3> by_perspective;
  for (const auto& v : verdicts) {
    if (!v.perspective) {
      throw Error(ErrorCode::MissingPerspective, "verdict " + v.prompt_key + " has no perspective");
    }
    auto& slot = by_perspective[static_cast<std::size_t>(*v.perspective)];
    if (slot) {
      throw Error(ErrorCode::DuplicatePerspective,
                  "two verdicts for perspective " + std::string(to_string(*v.perspective)));
    }
    slot = v.verdict.decision;
  }
  for (auto p : kAllPerspectives) {
    if (!by_perspective[static_cast<std::size_t>(p)]) {
      throw Error(ErrorCode::MissingPerspective,
                  "no verdict for perspective " + std::string(to_string(p)));
    }
  }
  return consensus_score(*by_perspective[0], *by_perspective[1], *by_perspective[2], config);
}

int decide(double score, double theta) noexcept { return score > theta ? 1 : 0; }

int majority_vote(std::span<const int> decisions) {
  if (decisions.size() % 2 == 0) {
    throw Error(ErrorCode::EvenPanel,
                "majority vote needs an odd panel, got " + std::to_string(decisions.size()));
  }
  const auto ones = std::count_if(decisions.begin(), decisions.end(), [](int d) { return d != 0; });
  return 2 * static_cast<std::size_t>(ones) > decisions.size() ? 1 : 0;
}

int majority_vote(std::span<const AgentVerdict> verdicts) {
  std::vector<int> decisions;
  decisions.reserve(verdicts.size());
  for (const auto& v : verdicts) decisions.push_back(v.verdict.decision);
  return majority_vote(decisions);
}

Detector::Detector(const KnowledgeBase& kb, const PromptLibrary& library,
                   const TemplateSet& templates, InferenceBackend& backend, FrameSource& frames,
                   DetectorOptions options)
    : kb_(kb),
      library_(library),
      templates_(templates),
      backend_(backend),
      frames_(frames),
      options_(std::move(options)) {
  options_.consensus.validate();
  options_.params.validate();
}

std::vector<EncodedImage> Detector::load_frames(const ClipWindow& clip) const {
  std::vector<EncodedImage> images;
  for (auto frame : sample_frames(clip, options_.frames_per_clip)) {
    images.push_back(frames_.load(clip.video_id, frame));
  }
  return images;
}

AgentVerdict Detector::run_agent(const ClipWindow& clip, int error_id, const CoTPrompt& prompt,
                                 const std::vector<EncodedImage>& frames, std::string agent,
                                 std::string prompt_key) const {
  AgentVerdict out;
  out.perspective = prompt.perspective;
  out.level = prompt.level;
  out.prompt_key = std::move(prompt_key);
  out.request_id = format_request_id({clip.video_id, clip.index, error_id, std::move(agent)});
  const auto request = build_request(prompt, frames, options_.params, out.request_id);
  out.verdict = parse_verdict(backend_.submit(request), options_.fallback);
  return out;
}

std::vector<AgentVerdict> Detector::run_level(const ClipWindow& clip, int error_id,
                                              ExpertiseLevel level,
                                              const std::vector<EncodedImage>& frames) const {
  std::vector<AgentVerdict> verdicts;
  for (auto p : kAllPerspectives) {
    const PromptKey key{error_id, level, p};
    verdicts.push_back(
        run_agent(clip, error_id, library_.at(key), frames, agent_code(level, p), to_string(key)));
  }
  return verdicts;
}

std::vector<AgentVerdict> Detector::run_pathway(const ClipWindow& clip, int error_id,
                                                Pathway pathway) const {
  return run_level(clip, error_id, pathway_level(pathway), load_frames(clip));
}

Detection Detector::detect(const ClipWindow& clip, int error_id, Mode mode) const {
  const auto record = lookup(kb_, error_id);
  const PromptOptions prompt_options{options_.frames_per_clip};

  Detection d;
  d.clip = clip;
  d.error_id = error_id;
  d.mode = mode;
  const auto frames = load_frames(clip);
  const std::string e = "e" + std::to_string(error_id);

  switch (mode) {
    case Mode::Baseline: {
      const auto prompt = baseline_prompt(record.category, templates_, prompt_options);
      d.verdicts.push_back(run_agent(clip, error_id, prompt, frames, "baseline", e + "/baseline"));
      d.decision = d.verdicts.front().verdict.decision;
      break;
    }
    case Mode::SingleCoT: {
      const auto prompt = generic_cot_prompt(record.category, templates_, prompt_options);
      d.verdicts.push_back(
          run_agent(clip, error_id, prompt, frames, "single-cot", e + "/single-cot"));
      d.decision = d.verdicts.front().verdict.decision;
      break;
    }
    case Mode::StaticCoT: {
      for (auto level : kAllLevels) {
        auto verdicts = run_level(clip, error_id, level, frames);
        d.verdicts.insert(d.verdicts.end(), verdicts.begin(), verdicts.end());
      }
      d.decision = majority_vote(d.verdicts);
      break;
    }
    case Mode::DynamicMajority: {
      d.pathway = route(record.risk);
      d.verdicts = run_level(clip, error_id, pathway_level(*d.pathway), frames);
      d.decision = majority_vote(d.verdicts);
      break;
    }
    case Mode::FullCARES: {
      d.pathway = route(record.risk);
      d.verdicts = run_level(clip, error_id, pathway_level(*d.pathway), frames);
      d.score = consensus_score(d.verdicts, options_.consensus);
      d.decision = decide(*d.score, options_.consensus.theta);
      break;
    }
  }
  return d;
}

Detection rescore(const Detection& detection, const ConsensusConfig& config) {
  if (detection.mode != Mode::FullCARES) {
    throw Error(ErrorCode::ScorelessDetections,
                "only full-mode detections can be rescored, got " +
                    std::string(to_string(detection.mode)));
  }
  Detection out = detection;
  out.score = consensus_score(out.verdicts, config);
  out.decision = decide(*out.score, config.theta);
  return out;
}

GroundTruthOracle annotation_oracle(std::vector<AnnotationRecord> annotations) {
  std::map<std::string, std::vector<AnnotationRecord>> by_video;
  for (auto& a : annotations) by_video[a.video_id].push_back(std::move(a));
  return [by_video = std::move(by_video)](const std::string& request_id) -> int {
    const auto tag = parse_request_id(request_id);
    if (!tag) {
      throw Error(ErrorCode::ConfigError, "mock oracle cannot interpret request id " + request_id);
    }
    const auto it = by_video.find(tag->video_id);
    if (it == by_video.end()) return 0;
    const ClipWindow clip{tag->video_id, static_cast<std::int64_t>(tag->clip_index) * kClipStride,
                          kClipLength, tag->clip_index};
    return label_clip(clip, it->second, tag->error_id);
  };
}

std::vector<DetectionTask> make_tasks(std::span<const VideoMeta> metas,
                                      std::span<const AnnotationRecord> annotations,
                                      std::span<const int> error_ids) {
  std::vector<DetectionTask> tasks;
  for (const auto& meta : metas) {
    std::vector<AnnotationRecord> video_annotations;
    for (const auto& a : annotations) {
      if (a.video_id == meta.video_id) video_annotations.push_back(a);
    }
    for (const auto& clip : window_clips(meta)) {
      for (int error_id : error_ids) {
        tasks.push_back({clip, error_id, label_clip(clip, video_annotations, error_id)});
      }
    }
  }
  return tasks;
}

void sort_detections(std::vector<Detection>& detections) {
  std::sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
    return std::tie(a.clip.video_id, a.clip.index, a.error_id, a.mode) <
           std::tie(b.clip.video_id, b.clip.index, b.error_id, b.mode);
  });
}

RunResult run_tasks(const Detector& detector, std::span<const DetectionTask> tasks, Mode mode,
                    int workers, const std::atomic<bool>* stop) {
  struct Slot {
    std::optional<Detection> detection;
    std::optional<std::string> failure;
  };
  std::vector<Slot> slots(tasks.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    while (stop == nullptr || !stop->load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        auto d = detector.detect(tasks[i].clip, tasks[i].error_id, mode);
        d.label = tasks[i].label;
        slots[i].detection = std::move(d);
      } catch (const std::exception& e) {
        slots[i].failure = e.what();
      }
    }
  };

  const int n = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(tasks.size(), 1))));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w) pool.emplace_back(work);
  }

  RunResult result;
  result.total_tasks = tasks.size();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (slots[i].detection) {
      result.detections.push_back(std::move(*slots[i].detection));
    } else if (slots[i].failure) {
      result.skipped.push_back({tasks[i].clip, tasks[i].error_id, *slots[i].failure});
    } else {
      result.interrupted = true;
    }
  }
  sort_detections(result.detections);
  return result;
}

nlohmann::json to_json(const Detection& d, bool include_traces) {
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : d.verdicts) {
    nlohmann::json jv = {
        {"prompt_key", v.prompt_key},
        {"request_id", v.request_id},
        {"level", v.level ? nlohmann::json(std::string(to_string(*v.level))) : nlohmann::json()},
        {"perspective",
         v.perspective ? nlohmann::json(std::string(to_string(*v.perspective))) : nlohmann::json()},
        {"decision", v.verdict.decision},
        {"parse_status", std::string(to_string(v.verdict.parse_status))},
    };
    if (include_traces) jv["trace"] = v.verdict.trace;
    verdicts.push_back(std::move(jv));
  }
  return {
      {"video_id", d.clip.video_id},
      {"clip_index", d.clip.index},
      {"start_frame", d.clip.start_frame},
      {"length", d.clip.length},
      {"error_id", d.error_id},
      {"mode", std::string(to_string(d.mode))},
      {"pathway", d.pathway ? nlohmann::json(std::string(to_string(*d.pathway))) : nlohmann::json()},
      {"score", d.score ? nlohmann::json(*d.score) : nlohmann::json()},
      {"decision", d.decision},
      {"label", d.label ? nlohmann::json(*d.label) : nlohmann::json()},
      {"verdicts", std::move(verdicts)},
  };
}

Detection detection_from_json(const nlohmann::json& j) {
  try {
    Detection d;
    d.clip.video_id = j.at("video_id").get<std::string>();
    d.clip.index = j.at("clip_index").get<int>();
    d.clip.start_frame = j.at("start_frame").get<std::int64_t>();
    d.clip.length = j.value("length", kClipLength);
    d.error_id = j.at("error_id").get<int>();
    const auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode) throw Error(ErrorCode::MalformedFile, "unknown mode in detection record");
    d.mode = *mode;
    if (!j.at("pathway").is_null()) {
      d.pathway = parse_pathway(j.at("pathway").get<std::string>());
      if (!d.pathway) throw Error(ErrorCode::MalformedFile, "unknown pathway in detection record");
    }
    if (!j.at("score").is_null()) d.score = j.at("score").get<double>();
    d.decision = j.at("decision").get<int>();
    if (j.contains("label") && !j.at("label").is_null()) d.label = j.at("label").get<int>();
    for (const auto& jv : j.at("verdicts")) {
      AgentVerdict v;
      v.prompt_key = jv.at("prompt_key").get<std::string>();
      v.request_id = jv.at("request_id").get<std::string>();
      if (!jv.at("level").is_null()) v.level = parse_level(jv.at("level").get<std::string>());
      if (!jv.at("perspective").is_null()) {
        v.perspective = parse_perspective(jv.at("perspective").get<std::string>());
      }
      v.verdict.decision = jv.at("decision").get<int>();
      v.verdict.parse_status =
          jv.at("parse_status").get<std::string>() == "Clean" ? ParseStatus::Clean : ParseStatus::Fallback;
      v.verdict.trace = jv.value("trace", "");
      d.verdicts.push_back(std::move(v));
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("bad detection record: ") + e.what());
  }
}

void write_detections(std::ostream& out, std::span<const Detection> detections,
                      bool include_traces) {
  for (const auto& d : detections) out << to_json(d, include_traces).dump() << '\n';
}

std::vector<Detection> read_detections(std::istream& in) {
  std::vector<Detection> detections;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::MalformedFile,
                  "detection stream line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("incomplete")) continue;
    detections.push_back(detection_from_json(j));
  }
  return detections;
}

}  // namespace cares

#include "cares/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cares/data.hpp"
#include "cares/error.hpp"
#include "cares/evalx.hpp"
#include "cares/inference.hpp"
#include "cares/knowledge.hpp"
#include "cares/pipeline.hpp"
#include "cares/promptgen.hpp"
#include "cares/router.hpp"

namespace fs = std::filesystem;

namespace cares {

std::atomic<bool>& cli_stop_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

constexpr int kExitFailure = 2;
constexpr int kExitInterrupted = 130;

struct RunOptions {
  std::string dataset_dir;
  std::string annotations;
  std::string metas;
  std::string kb;
  std::string templates;
  std::string mode = "full";
  std::string errors = "all";
  double alpha_t = 1.3;
  double alpha_s = 1.1;
  double alpha_p = 0.9;
  double theta = 2.25;
  bool allow_unordered = false;
  int frames_per_clip = 8;
  std::string frames_source = "auto";
  std::string backend = "mock";
  double mock_accuracy = 1.0;
  std::string mock_perspective_accuracy;
  std::string backend_url;
  std::string backend_key;
  std::string backend_model = "qwen2.5-vl";
  int max_attempts = 3;
  int backoff_ms = 1000;
  int timeout_ms = 120000;
  int max_tokens = 1024;
  int top_k = 40;
  double top_p = 0.8;
  double temperature = 0.8;
  std::string fallback = "assume-no-error";
  int runs = 1;
  std::uint64_t seed = 0;
  int workers = 4;
  std::string out = "cares-out";
  bool no_traces = false;
};

/// Everything a run needs, loaded and validated once.
struct Experiment {
  KnowledgeBase kb;
  TemplateSet templates;
  PromptLibrary library{std::map<PromptKey, CoTPrompt>{}};
  std::vector<VideoMeta> metas;
  std::vector<AnnotationRecord> annotations;
  std::vector<int> error_ids;
  fs::path frames_dir;  // empty: placeholder frames
  DetectorOptions detector;
};

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
  f << content;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  for (std::string part; std::getline(in, part, sep);) {
    part.erase(0, part.find_first_not_of(" \t"));
    part.erase(part.find_last_not_of(" \t") + 1);
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, "bad number '" + s + "' in " + what);
  }
}

std::vector<int> parse_error_selection(const std::string& s) {
  if (s == "all") return {1, 2, 3, 4, 5, 6};
  std::vector<int> ids;
  for (const auto& part : split(s, ',')) {
    const double v = parse_double(part, "--errors");
    const int id = static_cast<int>(v);
    if (v != id || id < 1 || id > kNumErrorTypes) {
      throw Error(ErrorCode::UnknownErrorId, "--errors entry '" + part + "' is not in 1..6");
    }
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  }
  if (ids.empty()) throw Error(ErrorCode::ConfigError, "--errors selects nothing");
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::map<Perspective, double> parse_perspective_accuracy(const std::string& s) {
  std::map<Perspective, double> out;
  for (const auto& part : split(s, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "--mock-perspective-accuracy expects P=value pairs");
    }
    std::string key = part.substr(0, eq);
    if (!key.empty()) key[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(key[0])));
    const auto p = parse_perspective(key);
    if (!p) throw Error(ErrorCode::ConfigError, "unknown perspective '" + part.substr(0, eq) + "'");
    out[*p] = parse_double(part.substr(eq + 1), "--mock-perspective-accuracy");
  }
  return out;
}

fs::path resolve_kb(const std::string& kb) { return kb.empty() ? default_kb_path() : fs::path(kb); }

TemplateSet resolve_templates(const std::string& dir) {
  return dir.empty() ? default_templates() : TemplateSet::load(dir);
}

void require_exists(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw Error(ErrorCode::ConfigError, what + " not found: " + p.string());
}

Experiment prepare(const RunOptions& o, Mode mode) {
  if (o.runs < 1) throw Error(ErrorCode::ConfigError, "--runs must be >= 1");
  if (o.workers < 1) throw Error(ErrorCode::ConfigError, "--workers must be >= 1");
  if (o.frames_per_clip < 1 || o.frames_per_clip > kClipLength) {
    throw Error(ErrorCode::BadSampleCount, "--frames-per-clip must be in 1..100");
  }
  if (o.dataset_dir.empty() && (o.metas.empty() || o.annotations.empty())) {
    throw Error(ErrorCode::ConfigError, "give --dataset-dir, or both --metas and --annotations");
  }

  Experiment x;
  const fs::path kb_path = resolve_kb(o.kb);
  require_exists(kb_path, "knowledge base");
  x.kb = load_knowledge_base(kb_path);
  x.templates = resolve_templates(o.templates);
  x.library = generate_library(x.kb, x.templates, PromptOptions{o.frames_per_clip});

  const fs::path dataset(o.dataset_dir);
  const fs::path metas_path = o.metas.empty() ? dataset / "metas.csv" : fs::path(o.metas);
  const fs::path ann_path = o.annotations.empty() ? dataset / "annotations.csv" : fs::path(o.annotations);
  require_exists(metas_path, "video metadata");
  require_exists(ann_path, "annotations");
  x.metas = load_metas(metas_path);
  x.annotations = load_annotations(ann_path);
  x.error_ids = parse_error_selection(o.errors);

  const fs::path videos = dataset / "videos";
  if (o.frames_source == "disk" || (o.frames_source == "auto" && !o.dataset_dir.empty() &&
                                    fs::is_directory(videos))) {
    require_exists(videos, "frame directory");
    x.frames_dir = videos;
  } else if (o.frames_source == "placeholder" || o.frames_source == "auto") {
    if (o.backend != "mock") {
      throw Error(ErrorCode::ConfigError,
                  "the remote backend needs frame images under <dataset-dir>/videos");
    }
  } else {
    throw Error(ErrorCode::ConfigError, "unknown --frames-source " + o.frames_source);
  }

  x.detector.consensus = {o.alpha_t, o.alpha_s, o.alpha_p, o.theta, o.allow_unordered};
  x.detector.consensus.validate();
  x.detector.params = {o.max_tokens, o.top_k, o.top_p, o.temperature};
  x.detector.params.validate();
  x.detector.frames_per_clip = o.frames_per_clip;
  if (o.fallback == "assume-no-error") {
    x.detector.fallback = FallbackPolicy::AssumeNoError;
  } else if (o.fallback == "error-out") {
    x.detector.fallback = FallbackPolicy::ErrorOut;
  } else {
    throw Error(ErrorCode::ConfigError, "unknown --fallback " + o.fallback);
  }
  (void)mode;
  return x;
}

std::unique_ptr<InferenceBackend> make_backend(const RunOptions& o, const Experiment& x,
                                               std::uint64_t seed) {
  if (o.backend == "mock") {
    MockConfig config;
    config.seed = seed;
    config.accuracy = o.mock_accuracy;
    config.perspective_accuracy = parse_perspective_accuracy(o.mock_perspective_accuracy);
    return std::make_unique<MockBackend>(config, annotation_oracle(x.annotations));
  }
  if (o.backend == "remote") {
    RemoteConfig config;
    config.url = o.backend_url;
    config.api_key = o.backend_key;
    config.model = o.backend_model;
    config.max_attempts = o.max_attempts;
    config.initial_backoff = std::chrono::milliseconds(o.backoff_ms);
    config.timeout = std::chrono::milliseconds(o.timeout_ms);
    return std::make_unique<RemoteBackend>(config);
  }
  throw Error(ErrorCode::ConfigError, "unknown --backend " + o.backend);
}

std::unique_ptr<FrameSource> make_frames(const Experiment& x) {
  if (x.frames_dir.empty()) return std::make_unique<PlaceholderFrameSource>();
  return std::make_unique<DirectoryFrameSource>(x.frames_dir);
}

struct RunOutput {
  RunResult result;
  std::size_t requests = 0;
};

RunOutput execute_run(const RunOptions& o, const Experiment& x, Mode mode, std::uint64_t seed) {
  auto backend = make_backend(o, x, seed);
  auto frames = make_frames(x);
  const Detector detector(x.kb, x.library, x.templates, *backend, *frames, x.detector);
  const auto tasks = make_tasks(x.metas, x.annotations, x.error_ids);
  RunOutput out;
  out.result = run_tasks(detector, tasks, mode, o.workers, &cli_stop_flag());
  for (const auto& d : out.result.detections) out.requests += d.verdicts.size();
  return out;
}

std::string skipped_csv(const std::vector<SkippedTask>& skipped) {
  std::string out = "video_id,clip_index,error_id,reason\n";
  for (const auto& s : skipped) {
    std::string reason = s.reason;
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    std::replace(reason.begin(), reason.end(), ',', ';');
    out += s.clip.video_id + "," + std::to_string(s.clip.index) + "," +
           std::to_string(s.error_id) + "," + reason + "\n";
  }
  return out;
}

std::string detections_jsonl(const RunResult& r, bool include_traces) {
  std::ostringstream os;
  write_detections(os, r.detections, include_traces);
  if (r.interrupted) {
    os << nlohmann::json{{"incomplete", true},
                         {"completed", r.detections.size() + r.skipped.size()},
                         {"total", r.total_tasks}}
              .dump()
       << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Option registration

void add_dataset_options(CLI::App* app, RunOptions& o) {
  app->add_option("--dataset-dir", o.dataset_dir,
                  "Dataset root holding metas.csv, annotations.csv and optional videos/");
  app->add_option("--annotations", o.annotations, "Annotation CSV (overrides the dataset default)");
  app->add_option("--metas", o.metas, "Video metadata CSV (overrides the dataset default)");
  app->add_option("--kb", o.kb, "Knowledge-base JSON (default: kb/default.json)");
}

void add_run_options(CLI::App* app, RunOptions& o, bool with_mode) {
  add_dataset_options(app, o);
  app->add_option("--templates", o.templates, "Prompt template directory (default: templates/)");
  if (with_mode) {
    app->add_option("--mode", o.mode, "Detection mode")
        ->check(CLI::IsMember({"baseline", "single-cot", "static-cot", "dynamic-majority", "full"}));
  }
  app->add_option("--errors", o.errors, "Error types to detect: 'all' or a list such as 1,3,6");
  app->add_option("--alpha-t", o.alpha_t, "Temporal agent weight");
  app->add_option("--alpha-s", o.alpha_s, "Spatial agent weight");
  app->add_option("--alpha-p", o.alpha_p, "Procedural agent weight");
  app->add_option("--theta", o.theta, "Consensus decision threshold (strict)");
  app->add_flag("--allow-unordered-alpha", o.allow_unordered,
                "Permit weights that break alpha-t > alpha-s > alpha-p");
  app->add_option("--frames-per-clip", o.frames_per_clip, "Frames sampled per clip (1..100)");
  app->add_option("--frames-source", o.frames_source,
                  "Where frames come from: auto, disk (<dataset-dir>/videos) or placeholder")
      ->check(CLI::IsMember({"auto", "disk", "placeholder"}));
  app->add_option("--backend", o.backend, "Inference backend")
      ->check(CLI::IsMember({"mock", "remote"}));
  app->add_option("--mock-accuracy", o.mock_accuracy,
                  "Probability a mock agent agrees with the ground truth")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--mock-perspective-accuracy", o.mock_perspective_accuracy,
                  "Per-perspective mock accuracy overrides, e.g. T=1.0,S=0.5,P=0.5");
  app->add_option("--backend-url", o.backend_url, "Chat-completions endpoint URL")
      ->envname("CARES_BACKEND_URL");
  app->add_option("--backend-key", o.backend_key, "Bearer token for the endpoint")
      ->envname("CARES_BACKEND_KEY");
  app->add_option("--backend-model", o.backend_model, "Model name sent to the endpoint")
      ->envname("CARES_BACKEND_MODEL");
  app->add_option("--max-attempts", o.max_attempts, "Attempts per remote request");
  app->add_option("--backoff-ms", o.backoff_ms, "First retry delay; doubles per retry");
  app->add_option("--timeout-ms", o.timeout_ms, "Timeout bounding each remote request");
  app->add_option("--max-tokens", o.max_tokens, "Generation limit");
  app->add_option("--top-k", o.top_k, "Top-k sampling");
  app->add_option("--top-p", o.top_p, "Top-p sampling");
  app->add_option("--temperature", o.temperature, "Sampling temperature");
  app->add_option("--fallback", o.fallback, "Policy for responses without a verdict sentinel")
      ->check(CLI::IsMember({"assume-no-error", "error-out"}));
  app->add_option("--runs", o.runs, "Independent passes; pass i uses seed + i");
  app->add_option("--seed", o.seed, "Base seed for the mock backend");
  app->add_option("--workers", o.workers, "Concurrent (clip, error) tasks");
  app->add_option("--out", o.out, "Output directory");
  app->add_flag("--no-traces", o.no_traces, "Write decisions without reasoning traces");
}

// ---------------------------------------------------------------------------
// Commands

int cmd_validate_kb(const std::string& kb_arg, bool show_routing, std::ostream& out) {
  const auto kb = load_knowledge_base(resolve_kb(kb_arg));
  out << "knowledge base OK: " << kb.categories.size() << " error types\n";
  if (show_routing) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-3s %-20s %4s %4s %4s  %s\n", "id", "name", "tis", "cis",
                  "psi", "pathway");
    out << buf;
    for (const auto& [id, category] : kb.categories) {
      const auto& risk = kb.risk_profiles.at(id);
      const int psi = risk_score(risk);
      std::snprintf(buf, sizeof buf, "%-3d %-20s %4d %4d %4d  %s\n", id, category.name.c_str(),
                    risk.tis, risk.cis, psi, std::string(to_string(route(psi))).c_str());
      out << buf;
    }
  }
  return 0;
}

std::string lower(std::string_view s) {
  std::string r(s);
  std::transform(r.begin(), r.end(), r.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return r;
}

int cmd_gen_prompts(const std::string& kb_arg, const std::string& templates_dir, int frames,
                    const std::string& out_dir, std::ostream& out) {
  const auto kb = load_knowledge_base(resolve_kb(kb_arg));
  const auto templates = resolve_templates(templates_dir);
  const auto library = generate_library(kb, templates, PromptOptions{frames});
  for (const auto& [key, prompt] : library.prompts()) {
    const auto name = "e" + std::to_string(key.error_id) + "_" + lower(to_string(key.level)) + "_" +
                      lower(to_string(key.perspective)) + ".txt";
    write_file(fs::path(out_dir) / name, prompt.render() + "\n");
  }
  out << "wrote " << library.size() << " prompts to " << out_dir << "\n";
  return 0;
}

int cmd_stats(const RunOptions& o, std::ostream& out) {
  if (o.dataset_dir.empty() && (o.metas.empty() || o.annotations.empty())) {
    throw Error(ErrorCode::ConfigError, "give --dataset-dir, or both --metas and --annotations");
  }
  const fs::path dataset(o.dataset_dir);
  const fs::path metas_path = o.metas.empty() ? dataset / "metas.csv" : fs::path(o.metas);
  const fs::path ann_path = o.annotations.empty() ? dataset / "annotations.csv" : fs::path(o.annotations);
  require_exists(metas_path, "video metadata");
  require_exists(ann_path, "annotations");
  const auto metas = load_metas(metas_path);
  const auto annotations = load_annotations(ann_path);
  std::optional<KnowledgeBase> kb;
  if (const auto kb_path = resolve_kb(o.kb); fs::exists(kb_path)) kb = load_knowledge_base(kb_path);
  out << format_stats(dataset_stats(annotations, metas), kb ? &*kb : nullptr);
  return 0;
}

std::string config_json(const RunOptions& o, Mode mode) {
  nlohmann::json j = {
      {"mode", std::string(to_string(mode))},
      {"errors", o.errors},
      {"alpha_t", o.alpha_t},
      {"alpha_s", o.alpha_s},
      {"alpha_p", o.alpha_p},
      {"theta", o.theta},
      {"frames_per_clip", o.frames_per_clip},
      {"backend", o.backend},
      {"backend_model", o.backend_model},
      {"mock_accuracy", o.mock_accuracy},
      {"mock_perspective_accuracy", o.mock_perspective_accuracy},
      {"max_tokens", o.max_tokens},
      {"top_k", o.top_k},
      {"top_p", o.top_p},
      {"temperature", o.temperature},
      {"fallback", o.fallback},
      {"runs", o.runs},
      {"seed", o.seed},
  };
  return j.dump(2) + "\n";
}

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  const Mode mode = *parse_mode(o.mode);
  const auto x = prepare(o, mode);
  const fs::path out_dir(o.out);
  fs::create_directories(out_dir);
  write_file(out_dir / "config.json", config_json(o, mode));

  std::map<EvalTask, std::vector<EvalReport>> per_task;
  std::size_t skipped = 0;
  std::size_t requests = 0;
  std::size_t tasks = 0;
  for (int i = 0; i < o.runs; ++i) {
    const auto seed = o.seed + static_cast<std::uint64_t>(i);
    const auto run = execute_run(o, x, mode, seed);
    const fs::path run_dir = out_dir / ("run_" + std::to_string(i));
    write_file(run_dir / "detections.jsonl", detections_jsonl(run.result, !o.no_traces));
    write_file(run_dir / "skipped.csv", skipped_csv(run.result.skipped));
    if (run.result.interrupted) {
      write_file(out_dir / "INCOMPLETE",
                 "run " + std::to_string(i) + " interrupted after " +
                     std::to_string(run.result.detections.size() + run.result.skipped.size()) +
                     " of " + std::to_string(run.result.total_tasks) + " tasks\n");
      err << "interrupted: partial detection stream written to " << (run_dir / "detections.jsonl")
          << "\n";
      return kExitInterrupted;
    }
    const auto reports = evaluate_detections(run.result.detections, mode);
    write_file(run_dir / "report.csv", reports_csv(reports));
    for (const auto& r : reports) per_task[r.task].push_back(r);
    skipped += run.result.skipped.size();
    requests += run.requests;
    tasks += run.result.total_tasks;
  }
  fs::remove(out_dir / "INCOMPLETE");

  std::vector<EvalReport> aggregated;
  for (const auto& [task, reports] : per_task) aggregated.push_back(aggregate_runs(reports));
  // Error types first, binary last.
  std::stable_partition(aggregated.begin(), aggregated.end(),
                        [](const EvalReport& r) { return r.task.error_id.has_value(); });
  write_file(out_dir / "report.csv", reports_csv(aggregated));

  std::string text = format_reports(aggregated);
  text += "tasks: " + std::to_string(tasks) + ", skipped: " + std::to_string(skipped) +
          ", inference requests: " + std::to_string(requests) + "\n";
  write_file(out_dir / "report.txt", text);
  out << text;
  return 0;
}

std::vector<fs::path> find_streams(const std::string& from, const std::vector<std::string>& files) {
  std::vector<fs::path> streams(files.begin(), files.end());
  if (!from.empty()) {
    if (fs::is_directory(from)) {
      for (const auto& entry : fs::directory_iterator(from)) {
        const auto candidate = entry.path() / "detections.jsonl";
        if (entry.is_directory() && entry.path().filename().string().rfind("run_", 0) == 0 &&
            fs::exists(candidate)) {
          streams.push_back(candidate);
        }
      }
    }
  }
  std::sort(streams.begin(), streams.end());
  if (streams.empty()) {
    throw Error(ErrorCode::ConfigError,
                "no detection stream found; run `cares run --mode full` first and pass --from <out>");
  }
  for (const auto& s : streams) require_exists(s, "detection stream");
  return streams;
}

int cmd_sweep_theta(const std::string& from, const std::vector<std::string>& files, double lo,
                    double hi, double step, const std::string& out_path, std::ostream& out) {
  const auto grid = theta_grid(lo, hi, step);
  std::vector<std::vector<SweepPoint>> curves;
  for (const auto& path : find_streams(from, files)) {
    std::ifstream in(path);
    const auto detections = read_detections(in);
    curves.push_back(theta_sweep(detections, grid));
  }
  // Average the per-stream curves point by point.
  std::vector<SweepPoint> mean = curves.front();
  for (std::size_t i = 0; i < mean.size(); ++i) {
    double mf1 = 0.0;
    double bacc = 0.0;
    int bacc_n = 0;
    std::int64_t positives = 0;
    for (const auto& c : curves) {
      if (c.size() != mean.size() || c[i].error_id != mean[i].error_id) {
        throw Error(ErrorCode::MixedTask, "detection streams cover different error types");
      }
      mf1 += c[i].mf1;
      if (c[i].bacc) {
        bacc += *c[i].bacc;
        ++bacc_n;
      }
      positives += c[i].positives;
    }
    mean[i].mf1 = mf1 / static_cast<double>(curves.size());
    mean[i].bacc = bacc_n > 0 ? std::optional<double>(bacc / bacc_n) : std::nullopt;
    mean[i].positives = positives;
  }
  const auto csv = sweep_csv(mean);
  if (out_path.empty()) {
    out << csv;
  } else {
    write_file(out_path, csv);
    out << "wrote " << grid.size() << " grid points to " << out_path << "\n";
  }
  return 0;
}

int cmd_calibrate_alpha(const RunOptions& o, const std::string& grid_text, std::ostream& out) {
  std::vector<double> grid;
  for (const auto& part : split(grid_text, ',')) grid.push_back(parse_double(part, "--alpha-grid"));
  if (grid.empty()) throw Error(ErrorCode::ConfigError, "--alpha-grid is empty");
  const std::map<Perspective, std::vector<double>> grids = {
      {Perspective::Temporal, grid}, {Perspective::Spatial, grid}, {Perspective::Procedural, grid}};

  // Check every configuration up front so a bad grid fails before inference.
  const auto check = [&](const ConsensusConfig&) { return CalibrationResult{}; };
  alpha_calibration(check, grids, o.theta, o.allow_unordered);

  RunOptions base = o;
  base.allow_unordered = false;
  base.alpha_t = 1.3;
  base.alpha_s = 1.1;
  base.alpha_p = 0.9;
  const auto x = prepare(base, Mode::FullCARES);
  std::vector<std::vector<Detection>> runs;
  for (int i = 0; i < o.runs; ++i) {
    auto run = execute_run(base, x, Mode::FullCARES, o.seed + static_cast<std::uint64_t>(i));
    if (run.result.interrupted) return kExitInterrupted;
    runs.push_back(std::move(run.result.detections));
  }

  const CalibrationRunner runner = [&](const ConsensusConfig& config) {
    CalibrationResult total;
    double bacc = 0.0;
    int bacc_n = 0;
    for (const auto& detections : runs) {
      std::vector<Detection> rescored;
      rescored.reserve(detections.size());
      for (const auto& d : detections) rescored.push_back(rescore(d, config));
      const auto reports = evaluate_detections(rescored, Mode::FullCARES);
      const auto s = summarize(reports);
      total.mf1 += s.mean_mf1;
      if (s.mean_bacc) {
        bacc += *s.mean_bacc;
        ++bacc_n;
      }
    }
    total.mf1 /= static_cast<double>(runs.size());
    if (bacc_n > 0) total.bacc = bacc / bacc_n;
    return total;
  };
  const auto rows = alpha_calibration(runner, grids, o.theta, o.allow_unordered);
  const auto csv = calibration_csv(rows);
  write_file(fs::path(o.out) / "alpha_calibration.csv", csv);
  out << csv;
  return 0;
}

// ---------------------------------------------------------------------------
// Configuration file: CLI flag > env var > config file > built-in default.

bool flag_given(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

std::vector<std::string> apply_config_file(const std::vector<std::string>& args, CLI::App& app) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty() || args.empty()) return args;

  CLI::App* sub = nullptr;
  for (auto* s : app.get_subcommands({})) {
    if (s->get_name() == args.front()) sub = s;
  }
  if (sub == nullptr) return args;

  std::ifstream in(config_path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file " + config_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("config file: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "config file must hold a JSON object");

  std::vector<std::string> merged = args;
  for (const auto& [key, value] : doc.items()) {
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr) {
      throw Error(ErrorCode::ConfigError,
                  "config key '" + key + "' is not an option of '" + sub->get_name() + "'");
    }
    if (flag_given(args, flag)) continue;
    if (const auto& env = opt->get_envname(); !env.empty()) {
      if (const char* v = std::getenv(env.c_str()); v != nullptr && *v != '\0') continue;
    }
    if (value.is_boolean()) {
      if (value.get<bool>()) merged.push_back(flag);
    } else if (value.is_string()) {
      merged.push_back(flag);
      merged.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      merged.push_back(flag);
      merged.push_back(value.dump());
    } else {
      throw Error(ErrorCode::ConfigError, "config key '" + key + "' must be a scalar");
    }
  }
  return merged;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Risk-routed multi-agent surgical error detection", "cares"};
  app.require_subcommand(1);
  std::string config_unused;

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Detect errors over a dataset and evaluate");
  add_run_options(run, run_opts, true);

  RunOptions cal_opts;
  std::string alpha_grid = "0.5,0.75,1.0,1.25,1.5,1.75,2.0,2.25,2.5";
  cal_opts.out = "cares-calibration";
  auto* cal = app.add_subcommand("calibrate-alpha",
                                 "Sweep each agent weight with the others held at 1.0");
  add_run_options(cal, cal_opts, false);
  cal->add_option("--alpha-grid", alpha_grid, "Comma-separated weights tried per perspective");

  std::string sweep_from;
  std::vector<std::string> sweep_files;
  double theta_min = 1.0;
  double theta_max = 3.3;
  double theta_step = 0.05;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep-theta", "Re-threshold stored consensus scores");
  sweep->add_option("--from", sweep_from, "Output directory of a prior `run --mode full`");
  sweep->add_option("--detections", sweep_files, "Detection stream file(s)");
  sweep->add_option("--theta-min", theta_min, "First threshold");
  sweep->add_option("--theta-max", theta_max, "Last threshold (inclusive)");
  sweep->add_option("--theta-step", theta_step, "Grid step");
  sweep->add_option("--out", sweep_out, "CSV output path (default: stdout)");

  std::string gen_kb;
  std::string gen_templates;
  std::string gen_out = "prompts";
  int gen_frames = 8;
  auto* gen = app.add_subcommand("gen-prompts", "Render the full prompt library for review");
  gen->add_option("--kb", gen_kb, "Knowledge-base JSON");
  gen->add_option("--templates", gen_templates, "Prompt template directory");
  gen->add_option("--frames-per-clip", gen_frames, "Frame count quoted in the prompts");
  gen->add_option("--out", gen_out, "Directory receiving one file per prompt");

  RunOptions stats_opts;
  auto* stats = app.add_subcommand("stats", "Dataset distribution report");
  add_dataset_options(stats, stats_opts);

  std::string validate_kb;
  bool show_routing = false;
  auto* validate = app.add_subcommand("validate-kb", "Validate a knowledge base");
  validate->add_option("--kb", validate_kb, "Knowledge-base JSON");
  validate->add_flag("--show-routing", show_routing, "Print error -> risk score -> pathway");

  for (auto* sub : {run, cal, sweep, gen, stats, validate}) {
    sub->add_option("--config", config_unused, "JSON file of option defaults (keys are flag names)");
  }

  try {
    auto effective = apply_config_file(args, app);
    std::reverse(effective.begin(), effective.end());
    app.parse(effective);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; every other parse failure is a usage error.
    return app.exit(e, out, err) == 0 ? 0 : 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  try {
    if (*run) return cmd_run(run_opts, out, err);
    if (*cal) return cmd_calibrate_alpha(cal_opts, alpha_grid, out);
    if (*sweep) {
      return cmd_sweep_theta(sweep_from, sweep_files, theta_min, theta_max, theta_step, sweep_out,
                             out);
    }
    if (*gen) return cmd_gen_prompts(gen_kb, gen_templates, gen_frames, gen_out, out);
    if (*stats) return cmd_stats(stats_opts, out);
    if (*validate) return cmd_validate_kb(validate_kb, show_routing, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace cares

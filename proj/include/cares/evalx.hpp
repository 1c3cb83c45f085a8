#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cares/pipeline.hpp"

namespace cares {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Throws LengthMismatch or EmptyInput.
ConfusionCounts confusion(std::span<const int> labels, std::span<const int> preds);

/// Mean of the class-0 and class-1 F1, in percent. A class absent from both
/// labels and predictions contributes 0.
double macro_f1(std::span<const int> labels, std::span<const int> preds);
double macro_f1(const ConfusionCounts& counts) noexcept;

/// 100 * (TPR + TNR) / 2. Throws SingleClassLabels when labels hold one class.
double balanced_accuracy(std::span<const int> labels, std::span<const int> preds);
std::optional<double> balanced_accuracy(const ConfusionCounts& counts) noexcept;

/// Per-error-type task, or the binary any-error task when error_id is empty.
struct EvalTask {
  std::optional<int> error_id;

  std::string name() const;
  bool operator==(const EvalTask&) const = default;
  auto operator<=>(const EvalTask&) const = default;
};

struct EvalReport {
  EvalTask task;
  Mode mode = Mode::FullCARES;
  double mf1 = 0.0;
  /// Empty when the labels hold a single class.
  std::optional<double> bacc;
  ConfusionCounts counts;
  int runs = 1;
  double mf1_std = 0.0;
  std::optional<double> bacc_std;
};

EvalReport evaluate(const EvalTask& task, Mode mode, std::span<const int> labels,
                    std::span<const int> preds);

/// One report per error type present, plus the binary task (a clip is
/// positive when any evaluated error type is). Detections must carry labels.
std::vector<EvalReport> evaluate_detections(std::span<const Detection> detections, Mode mode);

/// Mean and population standard deviation across runs of one task and mode.
/// Throws MixedTask or EmptyInput.
EvalReport aggregate_runs(std::span<const EvalReport> reports);

struct ReportSummary {
  /// Means over the per-error-type tasks (binary excluded).
  double mean_mf1 = 0.0;
  std::optional<double> mean_bacc;
  /// Median over per-error-type tasks of the across-run standard deviations.
  double median_mf1_std = 0.0;
  std::optional<double> median_bacc_std;
  int tasks = 0;
};

ReportSummary summarize(std::span<const EvalReport> reports);

/// lo, lo + step, ... up to hi inclusive; values rounded to 1e-9.
std::vector<double> theta_grid(double lo = 1.0, double hi = 3.3, double step = 0.05);

struct SweepPoint {
  double theta = 0.0;
  /// Empty for the mean-over-error-types row.
  std::optional<int> error_id;
  double mf1 = 0.0;
  std::optional<double> bacc;
  std::int64_t positives = 0;
};

/// Re-thresholds stored consensus scores. Throws ScorelessDetections when a
/// detection has no score.
std::vector<SweepPoint> theta_sweep(std::span<const Detection> detections,
                                    std::span<const double> grid);

struct CalibrationResult {
  double mf1 = 0.0;
  std::optional<double> bacc;
};

using CalibrationRunner = std::function<CalibrationResult(const ConsensusConfig&)>;

struct CalibrationRow {
  Perspective perspective = Perspective::Temporal;
  double alpha = 1.0;
  double mf1 = 0.0;
  std::optional<double> bacc;
};

/// Sweeps each perspective's weight over its grid with the other two held at
/// 1.0. Configurations breaking alpha_t > alpha_s > alpha_p need
/// allow_unordered, else OrderingViolation.
std::vector<CalibrationRow> alpha_calibration(const CalibrationRunner& runner,
                                              const std::map<Perspective, std::vector<double>>& grids,
                                              double theta, bool allow_unordered);

std::string reports_csv(std::span<const EvalReport> reports);
std::string format_reports(std::span<const EvalReport> reports);
std::string sweep_csv(std::span<const SweepPoint> points);
std::string calibration_csv(std::span<const CalibrationRow> rows);

}  // namespace cares

#include "cares/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include "cares/error.hpp"

namespace cares {
namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string fixed(const std::optional<double>& v, int decimals) {
  return v ? fixed(*v, decimals) : std::string("NA");
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double f1(std::int64_t tp, std::int64_t fp, std::int64_t fn) noexcept {
  const auto denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> preds) {
  if (labels.size() != preds.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(labels.size()) + " labels vs " +
                                               std::to_string(preds.size()) + " predictions");
  }
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "no labels to evaluate");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool y = labels[i] != 0;
    const bool p = preds[i] != 0;
    if (y && p) ++c.tp;
    else if (!y && p) ++c.fp;
    else if (!y && !p) ++c.tn;
    else ++c.fn;
  }
  return c;
}

double macro_f1(const ConfusionCounts& c) noexcept {
  // Class 0 swaps the roles of fp and fn.
  return 100.0 * 0.5 * (f1(c.tp, c.fp, c.fn) + f1(c.tn, c.fn, c.fp));
}

double macro_f1(std::span<const int> labels, std::span<const int> preds) {
  return macro_f1(confusion(labels, preds));
}

std::optional<double> balanced_accuracy(const ConfusionCounts& c) noexcept {
  const auto positives = c.tp + c.fn;
  const auto negatives = c.tn + c.fp;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const double tpr = static_cast<double>(c.tp) / static_cast<double>(positives);
  const double tnr = static_cast<double>(c.tn) / static_cast<double>(negatives);
  return 100.0 * (tpr + tnr) / 2.0;
}

double balanced_accuracy(std::span<const int> labels, std::span<const int> preds) {
  const auto b = balanced_accuracy(confusion(labels, preds));
  if (!b) throw Error(ErrorCode::SingleClassLabels, "balanced accuracy needs both classes in labels");
  return *b;
}

std::string EvalTask::name() const {
  return error_id ? "error " + std::to_string(*error_id) : std::string("binary");
}

EvalReport evaluate(const EvalTask& task, Mode mode, std::span<const int> labels,
                    std::span<const int> preds) {
  EvalReport r;
  r.task = task;
  r.mode = mode;
  r.counts = confusion(labels, preds);
  r.mf1 = macro_f1(r.counts);
  r.bacc = balanced_accuracy(r.counts);
  r.bacc_std = r.bacc ? std::optional<double>(0.0) : std::nullopt;
  return r;
}

std::vector<EvalReport> evaluate_detections(std::span<const Detection> detections, Mode mode) {
  std::map<int, std::pair<std::vector<int>, std::vector<int>>> per_error;
  // (video, clip) -> (any label, any decision)
  std::map<std::pair<std::string, int>, std::pair<int, int>> per_clip;
  for (const auto& d : detections) {
    if (!d.label) {
      throw Error(ErrorCode::EmptyInput, "detection for " + d.clip.video_id + " clip " +
                                             std::to_string(d.clip.index) + " has no label");
    }
    auto& [labels, preds] = per_error[d.error_id];
    labels.push_back(*d.label);
    preds.push_back(d.decision);
    auto& clip = per_clip[{d.clip.video_id, d.clip.index}];
    clip.first |= *d.label;
    clip.second |= d.decision;
  }
  std::vector<EvalReport> reports;
  for (const auto& [error_id, lp] : per_error) {
    reports.push_back(evaluate(EvalTask{error_id}, mode, lp.first, lp.second));
  }
  if (!per_clip.empty()) {
    std::vector<int> labels;
    std::vector<int> preds;
    for (const auto& [key, lp] : per_clip) {
      labels.push_back(lp.first);
      preds.push_back(lp.second);
    }
    reports.push_back(evaluate(EvalTask{}, mode, labels, preds));
  }
  return reports;
}

EvalReport aggregate_runs(std::span<const EvalReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no reports to aggregate");
  const auto& first = reports.front();
  EvalReport out;
  out.task = first.task;
  out.mode = first.mode;
  out.runs = 0;
  std::vector<double> mf1s;
  std::vector<double> baccs;
  for (const auto& r : reports) {
    if (!(r.task == first.task) || r.mode != first.mode) {
      throw Error(ErrorCode::MixedTask, "cannot aggregate " + r.task.name() + "/" +
                                            std::string(to_string(r.mode)) + " with " +
                                            first.task.name() + "/" +
                                            std::string(to_string(first.mode)));
    }
    out.runs += r.runs;
    out.counts.tp += r.counts.tp;
    out.counts.fp += r.counts.fp;
    out.counts.tn += r.counts.tn;
    out.counts.fn += r.counts.fn;
    mf1s.push_back(r.mf1);
    if (r.bacc) baccs.push_back(*r.bacc);
  }
  auto mean_std = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(sq / static_cast<double>(v.size()))};
  };
  std::tie(out.mf1, out.mf1_std) = mean_std(mf1s);
  if (!baccs.empty()) {
    const auto [mean, sd] = mean_std(baccs);
    out.bacc = mean;
    out.bacc_std = sd;
  }
  return out;
}

ReportSummary summarize(std::span<const EvalReport> reports) {
  ReportSummary s;
  std::vector<double> mf1_stds;
  std::vector<double> bacc_stds;
  double bacc_sum = 0.0;
  int bacc_n = 0;
  for (const auto& r : reports) {
    if (!r.task.error_id) continue;
    ++s.tasks;
    s.mean_mf1 += r.mf1;
    mf1_stds.push_back(r.mf1_std);
    if (r.bacc) {
      bacc_sum += *r.bacc;
      ++bacc_n;
      if (r.bacc_std) bacc_stds.push_back(*r.bacc_std);
    }
  }
  if (s.tasks > 0) s.mean_mf1 /= s.tasks;
  if (bacc_n > 0) s.mean_bacc = bacc_sum / bacc_n;
  s.median_mf1_std = median(mf1_stds);
  if (!bacc_stds.empty()) s.median_bacc_std = median(bacc_stds);
  return s;
}

std::vector<double> theta_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) {
    throw Error(ErrorCode::ConfigError, "theta grid needs step > 0 and hi >= lo");
  }
  const auto n = static_cast<std::int64_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    grid.push_back(quantize_score(lo + static_cast<double>(i) * step));
  }
  return grid;
}

std::vector<SweepPoint> theta_sweep(std::span<const Detection> detections,
                                    std::span<const double> grid) {
  if (detections.empty()) throw Error(ErrorCode::EmptyInput, "no detections to sweep");
  std::map<int, std::vector<const Detection*>> per_error;
  for (const auto& d : detections) {
    if (!d.score) {
      throw Error(ErrorCode::ScorelessDetections,
                  "detection in mode '" + std::string(to_string(d.mode)) +
                      "' has no consensus score; run with --mode full first");
    }
    if (!d.label) throw Error(ErrorCode::EmptyInput, "detection without a label");
    per_error[d.error_id].push_back(&d);
  }

  std::vector<SweepPoint> points;
  for (double theta : grid) {
    double mf1_sum = 0.0;
    double bacc_sum = 0.0;
    int bacc_n = 0;
    std::int64_t positives = 0;
    for (const auto& [error_id, list] : per_error) {
      std::vector<int> labels;
      std::vector<int> preds;
      for (const auto* d : list) {
        labels.push_back(*d->label);
        preds.push_back(decide(*d->score, theta));
      }
      const auto counts = confusion(labels, preds);
      SweepPoint p{theta, error_id, macro_f1(counts), balanced_accuracy(counts),
                   counts.tp + counts.fp};
      mf1_sum += p.mf1;
      if (p.bacc) {
        bacc_sum += *p.bacc;
        ++bacc_n;
      }
      positives += p.positives;
      points.push_back(p);
    }
    SweepPoint mean{theta, std::nullopt, mf1_sum / static_cast<double>(per_error.size()),
                    bacc_n > 0 ? std::optional<double>(bacc_sum / bacc_n) : std::nullopt,
                    positives};
    points.push_back(mean);
  }
  return points;
}

std::vector<CalibrationRow> alpha_calibration(const CalibrationRunner& runner,
                                              const std::map<Perspective, std::vector<double>>& grids,
                                              double theta, bool allow_unordered) {
  // Validate every configuration before spending any inference.
  std::vector<std::pair<Perspective, ConsensusConfig>> configs;
  for (auto p : kAllPerspectives) {
    const auto it = grids.find(p);
    if (it == grids.end()) continue;
    for (double value : it->second) {
      ConsensusConfig c{1.0, 1.0, 1.0, theta, allow_unordered};
      switch (p) {
        case Perspective::Temporal: c.alpha_t = value; break;
        case Perspective::Spatial: c.alpha_s = value; break;
        case Perspective::Procedural: c.alpha_p = value; break;
      }
      c.validate();
      configs.emplace_back(p, c);
    }
  }
  std::vector<CalibrationRow> rows;
  for (const auto& [p, c] : configs) {
    const auto result = runner(c);
    rows.push_back({p, c.weight(p), result.mf1, result.bacc});
  }
  return rows;
}

std::string reports_csv(std::span<const EvalReport> reports) {
  std::string out = "task,mode,runs,mf1,mf1_std,bacc,bacc_std,tp,fp,tn,fn\n";
  for (const auto& r : reports) {
    out += r.task.name() + "," + std::string(to_string(r.mode)) + "," + std::to_string(r.runs) +
           "," + fixed(r.mf1, 4) + "," + fixed(r.mf1_std, 4) + "," + fixed(r.bacc, 4) + "," +
           fixed(r.bacc_std, 4) + "," + std::to_string(r.counts.tp) + "," +
           std::to_string(r.counts.fp) + "," + std::to_string(r.counts.tn) + "," +
           std::to_string(r.counts.fn) + "\n";
  }
  return out;
}

std::string format_reports(std::span<const EvalReport> reports) {
  auto line = [](const std::string& task, const std::string& mode, const std::string& runs,
                 const std::string& mf1, const std::string& bacc) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-10s %-17s %5s %16s %16s\n", task.c_str(), mode.c_str(),
                  runs.c_str(), mf1.c_str(), bacc.c_str());
    return std::string(buf);
  };
  auto with_std = [](double v, std::optional<double> sd) {
    return fixed(v, 1) + (sd ? " +/- " + fixed(*sd, 1) : std::string());
  };
  std::string out = line("task", "mode", "runs", "mF1", "bACC");
  for (const auto& r : reports) {
    out += line(r.task.name(), std::string(to_string(r.mode)), std::to_string(r.runs),
                with_std(r.mf1, r.runs > 1 ? std::optional<double>(r.mf1_std) : std::nullopt),
                r.bacc ? with_std(*r.bacc, r.runs > 1 ? r.bacc_std : std::nullopt)
                       : std::string("NA"));
  }
  const auto s = summarize(reports);
  if (s.tasks > 0) {
    out += "avg over " + std::to_string(s.tasks) + " error types: mF1 " + fixed(s.mean_mf1, 1) +
           ", bACC " + fixed(s.mean_bacc, 1) + "\n";
    out += "median std across error types: mF1 " + fixed(s.median_mf1_std, 1) + ", bACC " +
           fixed(s.median_bacc_std, 1) + "\n";
  }
  return out;
}

std::string sweep_csv(std::span<const SweepPoint> points) {
  std::string out = "theta,task,mf1,bacc,positives\n";
  for (const auto& p : points) {
    out += fixed(p.theta, 4) + "," + (p.error_id ? "error " + std::to_string(*p.error_id) : "mean") +
           "," + fixed(p.mf1, 4) + "," + fixed(p.bacc, 4) + "," + std::to_string(p.positives) + "\n";
  }
  return out;
}

std::string calibration_csv(std::span<const CalibrationRow> rows) {
  std::string out = "perspective,alpha,mf1,bacc\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.perspective)) + "," + fixed(r.alpha, 4) + "," +
           fixed(r.mf1, 4) + "," + fixed(r.bacc, 4) + "\n";
  }
  return out;
}

}  // namespace cares

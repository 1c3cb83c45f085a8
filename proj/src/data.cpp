#include "cares/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cares/error.hpp"

namespace cares {
namespace {

std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string row_label(std::size_t line) { return "line " + std::to_string(line); }

std::int64_t parse_int(const std::string& cell, std::size_t line, const char* column) {
  std::int64_t value = 0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc{} || ptr != last) {
    throw Error(ErrorCode::MalformedRow,
                row_label(line) + ": column '" + column + "' is not an integer: '" + cell + "'");
  }
  return value;
}

void check_video_id(const std::string& id, std::size_t line) {
  if (id.empty() || id.find('/') != std::string::npos || id.find('\\') != std::string::npos) {
    throw Error(ErrorCode::MalformedRow, row_label(line) + ": invalid video_id '" + id + "'");
  }
}

// Calls row(cells, line) for every data row; skips blank lines and an
// optional header matching `header`.
template <typename RowFn>
void for_each_row(const std::string& csv, std::string_view header, std::size_t columns, RowFn row) {
  std::istringstream in(csv);
  std::size_t line_no = 0;
  bool first = true;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (first) {
      first = false;
      std::string joined;
      for (std::size_t i = 0; i < cells.size(); ++i) joined += (i ? "," : "") + cells[i];
      if (joined == header) continue;
    }
    if (cells.size() != columns) {
      throw Error(ErrorCode::MalformedRow, row_label(line_no) + ": expected " +
                                               std::to_string(columns) + " columns, got " +
                                               std::to_string(cells.size()));
    }
    row(cells, line_no);
  }
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MalformedRow, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::vector<AnnotationRecord> parse_annotations(const std::string& csv) {
  std::vector<AnnotationRecord> records;
  for_each_row(csv, "video_id,error_id,start_frame,end_frame", 4,
               [&](const std::vector<std::string>& cells, std::size_t line) {
                 AnnotationRecord r;
                 r.video_id = cells[0];
                 check_video_id(r.video_id, line);
                 const auto error_id = parse_int(cells[1], line, "error_id");
                 r.start_frame = parse_int(cells[2], line, "start_frame");
                 r.end_frame = parse_int(cells[3], line, "end_frame");
                 if (error_id < 1 || error_id > kNumErrorTypes) {
                   throw Error(ErrorCode::InvalidErrorId, row_label(line) + ": error_id " +
                                                              std::to_string(error_id) +
                                                              " outside 1..6");
                 }
                 r.error_id = static_cast<int>(error_id);
                 if (r.start_frame < 0) {
                   throw Error(ErrorCode::MalformedRow, row_label(line) + ": negative start_frame");
                 }
                 if (r.start_frame > r.end_frame) {
                   throw Error(ErrorCode::InvertedSpan,
                               row_label(line) + ": start_frame " + std::to_string(r.start_frame) +
                                   " > end_frame " + std::to_string(r.end_frame));
                 }
                 records.push_back(std::move(r));
               });
  return records;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  return parse_annotations(read_all(path));
}

std::vector<VideoMeta> parse_metas(const std::string& csv) {
  std::vector<VideoMeta> metas;
  std::set<std::string> seen;
  for_each_row(csv, "video_id,frame_count", 2,
               [&](const std::vector<std::string>& cells, std::size_t line) {
                 VideoMeta m;
                 m.video_id = cells[0];
                 check_video_id(m.video_id, line);
                 m.frame_count = parse_int(cells[1], line, "frame_count");
                 if (m.frame_count <= 0) {
                   throw Error(ErrorCode::MalformedRow, row_label(line) + ": frame_count must be > 0");
                 }
                 if (!seen.insert(m.video_id).second) {
                   throw Error(ErrorCode::MalformedRow,
                               row_label(line) + ": duplicate video_id '" + m.video_id + "'");
                 }
                 metas.push_back(std::move(m));
               });
  return metas;
}

std::vector<VideoMeta> load_metas(const std::filesystem::path& path) {
  return parse_metas(read_all(path));
}

std::int64_t clip_count(std::int64_t frame_count) noexcept {
  if (frame_count < kClipLength) return 0;
  return (frame_count - kClipLength) / kClipStride + 1;
}

std::vector<ClipWindow> window_clips(const VideoMeta& meta) {
  const auto n = clip_count(meta.frame_count);
  std::vector<ClipWindow> clips;
  clips.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    clips.push_back(ClipWindow{meta.video_id, i * kClipStride, kClipLength, static_cast<int>(i)});
  }
  return clips;
}

int label_clip(const ClipWindow& clip, std::span<const AnnotationRecord> annotations,
               std::optional<int> error_id) {
  for (const auto& a : annotations) {
    if (a.video_id != clip.video_id) continue;
    if (error_id && a.error_id != *error_id) continue;
    if (a.start_frame <= clip.last_frame() && a.end_frame >= clip.start_frame) return 1;
  }
  return 0;
}

std::vector<std::int64_t> sample_frames(const ClipWindow& clip, int n) {
  if (n < 1 || n > clip.length) {
    throw Error(ErrorCode::BadSampleCount,
                "frames per clip must be in 1.." + std::to_string(clip.length) + ", got " +
                    std::to_string(n));
  }
  std::vector<std::int64_t> frames;
  frames.reserve(static_cast<std::size_t>(n));
  if (n == 1) {
    frames.push_back(clip.start_frame);
    return frames;
  }
  const std::int64_t span = clip.length - 1;
  const std::int64_t denom = n - 1;
  for (std::int64_t i = 0; i < n; ++i) {
    // round(i * span / denom), halves rounded up
    frames.push_back(clip.start_frame + (2 * i * span + denom) / (2 * denom));
  }
  return frames;
}

DatasetStats dataset_stats(std::span<const AnnotationRecord> annotations,
                           std::span<const VideoMeta> metas) {
  DatasetStats stats;
  for (const auto& m : metas) stats.total_frames += m.frame_count;

  stats.categories.resize(kNumErrorTypes);
  for (int id = 1; id <= kNumErrorTypes; ++id) stats.categories[id - 1].error_id = id;

  std::map<std::string, std::vector<std::pair<std::int64_t, std::int64_t>>> spans;
  for (const auto& a : annotations) {
    auto& c = stats.categories.at(static_cast<std::size_t>(a.error_id - 1));
    ++c.instances;
    c.frames += a.length();
    spans[a.video_id].emplace_back(a.start_frame, a.end_frame);
  }
  for (const auto& c : stats.categories) {
    stats.total_instances += c.instances;
    stats.category_frames += c.frames;
  }
  for (auto& c : stats.categories) {
    c.percent = stats.category_frames > 0
                    ? 100.0 * static_cast<double>(c.frames) / static_cast<double>(stats.category_frames)
                    : 0.0;
  }

  // Union of inclusive spans per video; overlaps count once.
  for (auto& [video, list] : spans) {
    std::sort(list.begin(), list.end());
    std::int64_t cur_start = list.front().first;
    std::int64_t cur_end = list.front().second;
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i].first <= cur_end + 1) {
        cur_end = std::max(cur_end, list[i].second);
      } else {
        stats.error_frames += cur_end - cur_start + 1;
        cur_start = list[i].first;
        cur_end = list[i].second;
      }
    }
    stats.error_frames += cur_end - cur_start + 1;
  }
  stats.no_error_frames = stats.total_frames - stats.error_frames;
  if (stats.total_frames > 0) {
    stats.error_percent = 100.0 * static_cast<double>(stats.error_frames) /
                          static_cast<double>(stats.total_frames);
    stats.no_error_percent = 100.0 - stats.error_percent;
  }
  return stats;
}

std::string format_stats(const DatasetStats& stats, const KnowledgeBase* kb) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", v);
    return std::string(buf);
  };
  auto row = [](const std::string& a, const std::string& b, const std::string& c,
                const std::string& d) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-28s %10s %10s %8s\n", a.c_str(), b.c_str(), c.c_str(),
                  d.c_str());
    return std::string(buf);
  };
  std::string out;
  out += row("Category", "Instances", "Frames", "%");
  out += "# Binary error classification\n";
  out += row("No Error", "-", std::to_string(stats.no_error_frames), pct(stats.no_error_percent));
  out += row("Error", "-", std::to_string(stats.error_frames), pct(stats.error_percent));
  out += row("Total Frames", "-", std::to_string(stats.total_frames),
             pct(stats.total_frames > 0 ? 100.0 : 0.0));
  out += "# Multi-class breakdown (share of summed category frames)\n";
  for (const auto& c : stats.categories) {
    std::string name = "Error " + std::to_string(c.error_id);
    if (kb != nullptr) {
      if (auto it = kb->categories.find(c.error_id); it != kb->categories.end()) name = it->second.name;
    }
    out += row(name, std::to_string(c.instances), std::to_string(c.frames), pct(c.percent));
  }
  out += row("Total Error Frames", std::to_string(stats.total_instances),
             std::to_string(stats.category_frames), pct(stats.category_frames > 0 ? 100.0 : 0.0));
  return out;
}

std::string frame_file_name(std::int64_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06lld.jpg", static_cast<long long>(frame));
  return buf;
}

DirectoryFrameSource::DirectoryFrameSource(std::filesystem::path root, int max_open)
    : root_(std::move(root)), handles_(std::clamp(max_open, 1, 1024)) {}

EncodedImage DirectoryFrameSource::load(const std::string& video_id, std::int64_t frame) {
  const auto path = root_ / video_id / frame_file_name(frame);
  EncodedImage image;
  image.source = video_id + "/" + frame_file_name(frame);
  handles_.acquire();
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      handles_.release();
      throw Error(ErrorCode::FrameIO, "cannot read frame " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    image.bytes = buf.str();
  }
  handles_.release();
  if (image.bytes.empty()) {
    throw Error(ErrorCode::FrameIO, "empty frame file " + path.string());
  }
  return image;
}

EncodedImage PlaceholderFrameSource::load(const std::string& video_id, std::int64_t frame) {
  EncodedImage image;
  image.source = video_id + "/" + frame_file_name(frame);
  return image;
}

}  // namespace cares

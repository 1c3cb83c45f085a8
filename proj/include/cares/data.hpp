#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "cares/inference.hpp"
#include "cares/knowledge.hpp"

namespace cares {

inline constexpr double kFrameRateHz = 10.0;
/// 10 s clips advanced by 1 s, at 10 Hz.
inline constexpr int kClipLength = 100;
inline constexpr int kClipStride = 10;

/// Error span over frames, inclusive at both ends.
struct AnnotationRecord {
  std::string video_id;
  int error_id = 0;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;

  std::int64_t length() const noexcept { return end_frame - start_frame + 1; }
  bool operator==(const AnnotationRecord&) const = default;
};

struct VideoMeta {
  std::string video_id;
  std::int64_t frame_count = 0;
  double fps = kFrameRateHz;
};

struct ClipWindow {
  std::string video_id;
  std::int64_t start_frame = 0;
  int length = kClipLength;
  int index = 0;

  std::int64_t last_frame() const noexcept { return start_frame + length - 1; }
  bool operator==(const ClipWindow&) const = default;
};

/// CSV with header video_id,error_id,start_frame,end_frame. Errors name the
/// 1-based line number.
std::vector<AnnotationRecord> parse_annotations(const std::string& csv);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

/// CSV with header video_id,frame_count.
std::vector<VideoMeta> parse_metas(const std::string& csv);
std::vector<VideoMeta> load_metas(const std::filesystem::path& path);

/// max(0, floor((frame_count - 100) / 10) + 1)
std::int64_t clip_count(std::int64_t frame_count) noexcept;
std::vector<ClipWindow> window_clips(const VideoMeta& meta);

/// 1 iff an annotation of the given type (any type when error_id is
/// nullopt) on the clip's video overlaps the clip's inclusive frame range.
int label_clip(const ClipWindow& clip, std::span<const AnnotationRecord> annotations,
               std::optional<int> error_id);

/// n evenly spaced, strictly increasing frame indices spanning the clip.
/// Throws BadSampleCount unless 1 <= n <= clip.length.
std::vector<std::int64_t> sample_frames(const ClipWindow& clip, int n);

struct CategoryStats {
  int error_id = 0;
  std::int64_t instances = 0;
  std::int64_t frames = 0;
  /// Share of the summed per-category frames.
  double percent = 0.0;
};

struct DatasetStats {
  std::int64_t total_frames = 0;
  /// Frames covered by at least one annotation of any type.
  std::int64_t error_frames = 0;
  std::int64_t no_error_frames = 0;
  double error_percent = 0.0;
  double no_error_percent = 0.0;
  std::vector<CategoryStats> categories;
  std::int64_t total_instances = 0;
  std::int64_t category_frames = 0;
};

DatasetStats dataset_stats(std::span<const AnnotationRecord> annotations,
                           std::span<const VideoMeta> metas);

/// Table-style plain-text report; category names come from kb when given.
std::string format_stats(const DatasetStats& stats, const KnowledgeBase* kb = nullptr);

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// Safe to call concurrently.
  virtual EncodedImage load(const std::string& video_id, std::int64_t frame) = 0;
};

std::string frame_file_name(std::int64_t frame);

/// Reads <root>/<video_id>/frame_%06d.jpg with at most max_open files open.
class DirectoryFrameSource final : public FrameSource {
 public:
  explicit DirectoryFrameSource(std::filesystem::path root, int max_open = 16);
  EncodedImage load(const std::string& video_id, std::int64_t frame) override;

 private:
  std::filesystem::path root_;
  std::counting_semaphore<1024> handles_;
};

/// Frame references without pixel data, for the mock backend.
class PlaceholderFrameSource final : public FrameSource {
 public:
  EncodedImage load(const std::string& video_id, std::int64_t frame) override;
};

}  // namespace cares

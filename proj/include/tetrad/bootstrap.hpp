#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tetrad/grid.hpp"
#include "tetrad/ppm.hpp"

namespace tetrad::bootstrap {

namespace fs = std::filesystem;

struct PhotoRef {
  std::string photo_id;
  fs::path path;
  friend bool operator==(const PhotoRef&, const PhotoRef&) = default;
};

// Pixel rectangle, top-left origin.
struct FaceBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool fits(int width, int height) const;
  friend bool operator==(const FaceBox&, const FaceBox&) = default;
};

struct TagEntry {
  PhotoRef photo;
  std::string friend_name;
  FaceBox box;
};

struct FaceImage {
  ImageId image_id;
  std::string friend_name;
  PhotoRef source;
  FaceBox box;
  fs::path crop_path;  // relative to the faces directory

  friend bool operator==(const FaceImage&, const FaceImage&) = default;
};

// A friend whose photo could not be turned into a face.
struct Skipped {
  std::string friend_name;
  std::string photo_id;
  std::string code;  // ErrorCode name
  std::string reason;

  friend bool operator==(const Skipped&, const Skipped&) = default;
};

// Pluggable detector: photo -> boxes in a deterministic order.
class FaceDetector {
public:
  virtual ~FaceDetector() = default;
  virtual std::vector<FaceBox> detect(const PhotoRef& photo, const ppm::Image& pixels) const = 0;
};

// Reads boxes from `<photo path>.faces.json`, a JSON array of {x, y, w, h}.
// A missing sidecar means no faces.
class SidecarDetector final : public FaceDetector {
public:
  std::vector<FaceBox> detect(const PhotoRef& photo, const ppm::Image& pixels) const override;
};

fs::path sidecar_path(const fs::path& photo);

// Reads the photo, then asks the detector. Throws IoError / FormatError.
std::vector<FaceBox> detect_faces(const PhotoRef& photo, const FaceDetector& detector);

// Stable FNV-1a over (friend_name, photo_id, box); "f" + 16 hex digits.
ImageId derive_image_id(const std::string& friend_name, const std::string& photo_id,
                        const FaceBox& box);

// Copies `box` out of `pixels`. Throws ValidationError if it does not fit.
ppm::Image crop(const ppm::Image& pixels, const FaceBox& box);

// Crops `box`, writes `<faces_dir>/crops/<image_id>.ppm`, returns metadata.
FaceImage crop_face(const PhotoRef& photo, const ppm::Image& pixels, const std::string& friend_name,
                    const FaceBox& box, const fs::path& faces_dir);

// Crops the first detected box only. Throws NoFaceError when none.
FaceImage extract_first_face(const PhotoRef& photo, const FaceDetector& detector,
                             const std::string& friend_name, const fs::path& faces_dir);

// Tag manifest: JSON array of {photo_id, photo_path, friend_name, box}.
// Relative photo paths resolve against the manifest's directory. Entries that
// do not parse are reported in `invalid`.
struct Manifest {
  std::vector<TagEntry> entries;
  std::vector<Skipped> invalid;
};

Manifest read_manifest(const fs::path& manifest_path);

struct IngestResult {
  std::vector<FaceImage> faces;
  std::vector<Skipped> skipped;
};

// Sequential tag path. Throws IoError when the manifest is missing.
IngestResult ingest_tags(const fs::path& manifest_path, const fs::path& faces_dir);

enum class Mode { jack, jill };

Mode parse_mode(std::string_view text);

struct Friend {
  std::string name;
  PhotoRef photo;
  std::optional<FaceBox> tag;  // set for jill, detector used otherwise
};

// Jack corpus: `<dir>/friends.json` ([{friend_name, photo_id, photo_path}])
// when present, else every *.ppm in the directory named after its stem.
std::vector<Friend> load_corpus(const fs::path& corpus_dir);

// Tag entries as friends; invalid manifest entries are appended to `invalid`.
std::vector<Friend> load_tagged_friends(const fs::path& manifest_path, std::vector<Skipped>* invalid);

struct PipelineConfig {
  Mode mode = Mode::jill;
  int workers = 1;
  fs::path corpus_dir;   // corpus directory (jack) or manifest file (jill)
  fs::path output_dir;   // faces land in <output_dir>/faces
  // Called by a worker before it processes friend i. Test hook.
  std::function<void(std::size_t)> before_task;
};

fs::path faces_dir(const PipelineConfig& config);

// Order-insensitive sink shared by the workers of one run. Readers may take
// snapshots or block for progress at any time.
class ResultCollector {
public:
  void publish(FaceImage face);
  void fail(Skipped skipped);
  void finish();

  // Completion order.
  std::vector<FaceImage> snapshot() const;
  std::vector<Skipped> failures() const;
  bool finished() const;

  // Blocks until at least n results exist or the run finished. Returns
  // whether n results are available.
  bool wait_for(std::size_t n) const;
  void wait_finished() const;

private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<FaceImage> faces_;
  std::vector<Skipped> failures_;
  bool finished_ = false;
};

// A running pipeline. Destruction waits for the workers.
class PipelineJob {
public:
  // prior_failures: friends rejected before the run (e.g. bad manifest rows).
  PipelineJob(PipelineConfig config, std::vector<Friend> friends,
              std::shared_ptr<const FaceDetector> detector, std::vector<Skipped> prior_failures = {});
  ~PipelineJob();
  PipelineJob(const PipelineJob&) = delete;
  PipelineJob& operator=(const PipelineJob&) = delete;

  const ResultCollector& results() const { return collector_; }
  std::size_t total() const { return friends_.size(); }

  // Joins the workers; returns the faces sorted by image_id.
  std::vector<FaceImage> wait();

private:
  void work();
  void process(std::size_t i);

  PipelineConfig config_;
  std::vector<Friend> friends_;
  std::shared_ptr<const FaceDetector> detector_;
  ResultCollector collector_;
  std::atomic<std::size_t> next_{0};
  std::atomic<int> running_{0};
  std::vector<std::jthread> workers_;
};

// Starts workers immediately; each friend is handled by exactly one worker.
std::unique_ptr<PipelineJob> run_pipeline(
    PipelineConfig config, std::vector<Friend> friends,
    std::shared_ptr<const FaceDetector> detector = std::make_shared<SidecarDetector>());

// Friends for the configured mode: load_corpus or load_tagged_friends.
// Manifest entries that fail to parse become failures of the returned job.
std::unique_ptr<PipelineJob> run_pipeline(
    PipelineConfig config,
    std::shared_ptr<const FaceDetector> detector = std::make_shared<SidecarDetector>());

// `<faces_dir>/index.json`, sorted by image_id.
void write_index(const fs::path& faces_dir, std::vector<FaceImage> faces);
std::vector<FaceImage> read_index(const fs::path& index_path);

// Validates the user's 45 picks against the bootstrap results.
// Throws CardinalityError, DuplicateError or UnknownImageError.
std::vector<ImageId> select_for_registration(std::span<const FaceImage> results,
                                             std::span<const ImageId> chosen);

}  // namespace tetrad::bootstrap

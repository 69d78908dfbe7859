#include "tetrad/bootstrap.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "tetrad/errors.hpp"

namespace tetrad::bootstrap {

using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

FaceBox box_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("box must be an object");
  FaceBox box;
  for (auto [key, field] : {std::pair{"x", &box.x}, {"y", &box.y}, {"w", &box.w}, {"h", &box.h}}) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer()) {
      throw FormatError(std::string("box field '") + key + "' must be an integer");
    }
    const auto value = it->get<long long>();
    if (value < INT32_MIN || value > INT32_MAX) throw FormatError("box field out of range");
    *field = static_cast<int>(value);
  }
  return box;
}

json box_to_json(const FaceBox& box) {
  return json{{"x", box.x}, {"y", box.y}, {"w", box.w}, {"h", box.h}};
}

std::string string_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw FormatError(std::string("field '") + key + "' must be a non-empty string");
  }
  return it->get<std::string>();
}

std::string optional_string(const json& j, const char* key) {
  if (!j.is_object()) return {};
  const auto it = j.find(key);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

Skipped skip_for(const Friend& f, const Error& e) {
  return {f.name, f.photo.photo_id, std::string(to_string(e.code())), e.what()};
}

void write_atomically(const fs::path& target, const ppm::Image& image) {
  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id();
  const fs::path tmp = target.string() + suffix.str();
  ppm::write(tmp, image);
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move crop into place: " + target.string());
  }
}

}  // namespace

bool FaceBox::fits(int width, int height) const {
  return x >= 0 && y >= 0 && w > 0 && h > 0 && static_cast<long long>(x) + w <= width &&
         static_cast<long long>(y) + h <= height;
}

fs::path sidecar_path(const fs::path& photo) { return fs::path(photo.string() + ".faces.json"); }

std::vector<FaceBox> SidecarDetector::detect(const PhotoRef& photo, const ppm::Image&) const {
  const fs::path sidecar = sidecar_path(photo.path);
  if (!fs::exists(sidecar)) return {};
  const json j = read_json_file(sidecar);
  if (!j.is_array()) throw FormatError(sidecar.string() + ": expected an array of boxes");
  std::vector<FaceBox> boxes;
  for (const json& entry : j) {
    try {
      boxes.push_back(box_from_json(entry));
    } catch (const FormatError& e) {
      throw FormatError(sidecar.string() + ": " + e.what());
    }
  }
  return boxes;
}

std::vector<FaceBox> detect_faces(const PhotoRef& photo, const FaceDetector& detector) {
  return detector.detect(photo, ppm::read(photo.path));
}

ImageId derive_image_id(const std::string& friend_name, const std::string& photo_id,
                        const FaceBox& box) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view bytes) {
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;  // field separator
    h *= 0x100000001b3ULL;
  };
  feed(friend_name);
  feed(photo_id);
  for (int v : {box.x, box.y, box.w, box.h}) feed(std::to_string(v));
  char buf[18];
  std::snprintf(buf, sizeof buf, "f%016llx", static_cast<unsigned long long>(h));
  return ImageId(buf);
}

ppm::Image crop(const ppm::Image& pixels, const FaceBox& box) {
  if (!box.fits(pixels.width, pixels.height)) {
    throw ValidationError("box (" + std::to_string(box.x) + "," + std::to_string(box.y) + "," +
                          std::to_string(box.w) + "," + std::to_string(box.h) +
                          ") exceeds photo bounds " + std::to_string(pixels.width) + "x" +
                          std::to_string(pixels.height));
  }
  ppm::Image out(box.w, box.h);
  const std::size_t row_bytes = static_cast<std::size_t>(box.w) * 3;
  for (int y = 0; y < box.h; ++y) {
    std::copy_n(pixels.pixel(box.x, box.y + y), row_bytes, out.pixel(0, y));
  }
  return out;
}

FaceImage crop_face(const PhotoRef& photo, const ppm::Image& pixels, const std::string& friend_name,
                    const FaceBox& box, const fs::path& faces_dir) {
  if (friend_name.empty()) throw ValidationError("friend name must be non-empty");
  const ppm::Image face = crop(pixels, box);
  ImageId id = derive_image_id(friend_name, photo.photo_id, box);
  const fs::path relative = fs::path("crops") / (id.str() + ".ppm");
  std::error_code ec;
  fs::create_directories(faces_dir / "crops", ec);
  if (ec) throw IoError("cannot create " + (faces_dir / "crops").string());
  write_atomically(faces_dir / relative, face);
  return FaceImage{std::move(id), friend_name, photo, box, relative};
}

FaceImage extract_first_face(const PhotoRef& photo, const FaceDetector& detector,
                             const std::string& friend_name, const fs::path& faces_dir) {
  const ppm::Image pixels = ppm::read(photo.path);
  const std::vector<FaceBox> boxes = detector.detect(photo, pixels);
  if (boxes.empty()) throw NoFaceError("no face found in " + photo.photo_id);
  return crop_face(photo, pixels, friend_name, boxes.front(), faces_dir);
}

Manifest read_manifest(const fs::path& manifest_path) {
  if (!fs::exists(manifest_path)) throw IoError("manifest not found: " + manifest_path.string());
  const json j = read_json_file(manifest_path);
  if (!j.is_array()) throw FormatError(manifest_path.string() + ": expected an array of tags");
  const fs::path base = manifest_path.parent_path();
  Manifest out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& entry = j[i];
    try {
      if (!entry.is_object()) throw FormatError("tag entry must be an object");
      const auto box_it = entry.find("box");
      if (box_it == entry.end()) throw FormatError("tag entry has no box");
      out.entries.push_back(TagEntry{
          PhotoRef{string_field(entry, "photo_id"), resolve(base, string_field(entry, "photo_path"))},
          string_field(entry, "friend_name"), box_from_json(*box_it)});
    } catch (const FormatError& e) {
      out.invalid.push_back({optional_string(entry, "friend_name"), optional_string(entry, "photo_id"),
                             std::string(to_string(ErrorCode::format)),
                             "entry " + std::to_string(i) + ": " + e.what()});
    }
  }
  return out;
}

IngestResult ingest_tags(const fs::path& manifest_path, const fs::path& faces_dir) {
  Manifest manifest = read_manifest(manifest_path);
  IngestResult result;
  result.skipped = std::move(manifest.invalid);
  std::unordered_set<ImageId> seen;
  for (const TagEntry& tag : manifest.entries) {
    try {
      if (!seen.insert(derive_image_id(tag.friend_name, tag.photo.photo_id, tag.box)).second) {
        throw DuplicateError("duplicate tag for " + tag.friend_name + " in " + tag.photo.photo_id);
      }
      result.faces.push_back(
          crop_face(tag.photo, ppm::read(tag.photo.path), tag.friend_name, tag.box, faces_dir));
    } catch (const Error& e) {
      result.skipped.push_back({tag.friend_name, tag.photo.photo_id,
                                std::string(to_string(e.code())), e.what()});
    }
  }
  return result;
}

Mode parse_mode(std::string_view text) {
  if (text == "jack") return Mode::jack;
  if (text == "jill") return Mode::jill;
  throw ValidationError("mode must be 'jack' or 'jill'");
}

std::vector<Friend> load_corpus(const fs::path& corpus_dir) {
  if (!fs::is_directory(corpus_dir)) throw IoError("corpus directory not found: " + corpus_dir.string());
  std::vector<Friend> friends;
  const fs::path listing = corpus_dir / "friends.json";
  if (fs::exists(listing)) {
    const json j = read_json_file(listing);
    if (!j.is_array()) throw FormatError(listing.string() + ": expected an array of friends");
    for (const json& entry : j) {
      if (!entry.is_object()) throw FormatError(listing.string() + ": friend must be an object");
      friends.push_back(Friend{string_field(entry, "friend_name"),
                               PhotoRef{string_field(entry, "photo_id"),
                                        resolve(corpus_dir, string_field(entry, "photo_path"))},
                               std::nullopt});
    }
    return friends;
  }
  std::vector<fs::path> photos;
  for (const auto& e : fs::directory_iterator(corpus_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") photos.push_back(e.path());
  }
  std::sort(photos.begin(), photos.end());
  for (const fs::path& p : photos) {
    const std::string stem = p.stem().string();
    friends.push_back(Friend{stem, PhotoRef{stem, p}, std::nullopt});
  }
  return friends;
}

std::vector<Friend> load_tagged_friends(const fs::path& manifest_path, std::vector<Skipped>* invalid) {
  Manifest manifest = read_manifest(manifest_path);
  if (invalid) invalid->insert(invalid->end(), manifest.invalid.begin(), manifest.invalid.end());
  std::vector<Friend> friends;
  for (TagEntry& tag : manifest.entries) {
    friends.push_back(Friend{std::move(tag.friend_name), std::move(tag.photo), tag.box});
  }
  return friends;
}

fs::path faces_dir(const PipelineConfig& config) { return config.output_dir / "faces"; }

void ResultCollector::publish(FaceImage face) {
  {
    std::lock_guard lock(mu_);
    const bool duplicate = std::any_of(faces_.begin(), faces_.end(), [&](const FaceImage& f) {
      return f.image_id == face.image_id;
    });
    if (duplicate) {
      failures_.push_back({face.friend_name, face.source.photo_id,
                           std::string(to_string(ErrorCode::duplicate)),
                           "duplicate image id " + face.image_id.str()});
    } else {
      faces_.push_back(std::move(face));
    }
  }
  cv_.notify_all();
}

void ResultCollector::fail(Skipped skipped) {
  {
    std::lock_guard lock(mu_);
    failures_.push_back(std::move(skipped));
  }
  cv_.notify_all();
}

void ResultCollector::finish() {
  {
    std::lock_guard lock(mu_);
    finished_ = true;
  }
  cv_.notify_all();
}

std::vector<FaceImage> ResultCollector::snapshot() const {
  std::lock_guard lock(mu_);
  return faces_;
}

std::vector<Skipped> ResultCollector::failures() const {
  std::lock_guard lock(mu_);
  return failures_;
}

bool ResultCollector::finished() const {
  std::lock_guard lock(mu_);
  return finished_;
}

bool ResultCollector::wait_for(std::size_t n) const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return faces_.size() >= n || finished_; });
  return faces_.size() >= n;
}

void ResultCollector::wait_finished() const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return finished_; });
}

PipelineJob::PipelineJob(PipelineConfig config, std::vector<Friend> friends,
                         std::shared_ptr<const FaceDetector> detector,
                         std::vector<Skipped> prior_failures)
    : config_(std::move(config)), friends_(std::move(friends)), detector_(std::move(detector)) {
  if (config_.workers < 1) throw ValidationError("workers must be >= 1");
  if (!detector_) throw ValidationError("a face detector is required");
  for (Skipped& s : prior_failures) collector_.fail(std::move(s));
  const int n = static_cast<int>(std::min<std::size_t>(config_.workers, std::max<std::size_t>(friends_.size(), 1)));
  if (friends_.empty()) {
    collector_.finish();
    return;
  }
  running_ = n;
  for (int i = 0; i < n; ++i) workers_.emplace_back([this] { work(); });
}

PipelineJob::~PipelineJob() { workers_.clear(); }

std::vector<FaceImage> PipelineJob::wait() {
  workers_.clear();  // joins
  collector_.wait_finished();
  auto faces = collector_.snapshot();
  std::sort(faces.begin(), faces.end(),
            [](const FaceImage& a, const FaceImage& b) { return a.image_id < b.image_id; });
  return faces;
}

void PipelineJob::work() {
  for (std::size_t i = next_++; i < friends_.size(); i = next_++) process(i);
  if (--running_ == 0) collector_.finish();
}

void PipelineJob::process(std::size_t i) {
  const Friend& f = friends_[i];
  try {
    if (config_.before_task) config_.before_task(i);
    const fs::path out = faces_dir(config_);
    if (f.tag) {
      collector_.publish(crop_face(f.photo, ppm::read(f.photo.path), f.name, *f.tag, out));
    } else {
      collector_.publish(extract_first_face(f.photo, *detector_, f.name, out));
    }
  } catch (const Error& e) {
    collector_.fail(skip_for(f, e));
  } catch (const std::exception& e) {
    collector_.fail({f.name, f.photo.photo_id, std::string(to_string(ErrorCode::io)), e.what()});
  }
}

std::unique_ptr<PipelineJob> run_pipeline(PipelineConfig config, std::vector<Friend> friends,
                                          std::shared_ptr<const FaceDetector> detector) {
  return std::make_unique<PipelineJob>(std::move(config), std::move(friends), std::move(detector));
}

std::unique_ptr<PipelineJob> run_pipeline(PipelineConfig config,
                                          std::shared_ptr<const FaceDetector> detector) {
  std::vector<Skipped> invalid;
  std::vector<Friend> friends = config.mode == Mode::jack
                                    ? load_corpus(config.corpus_dir)
                                    : load_tagged_friends(config.corpus_dir, &invalid);
  return std::make_unique<PipelineJob>(std::move(config), std::move(friends), std::move(detector),
                                       std::move(invalid));
}

void write_index(const fs::path& dir, std::vector<FaceImage> faces) {
  std::sort(faces.begin(), faces.end(),
            [](const FaceImage& a, const FaceImage& b) { return a.image_id < b.image_id; });
  json arr = json::array();
  for (const FaceImage& f : faces) {
    arr.push_back({{"image_id", f.image_id.str()},
                   {"friend_name", f.friend_name},
                   {"photo_id", f.source.photo_id},
                   {"box", box_to_json(f.box)},
                   {"crop_path", f.crop_path.generic_string()}});
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path target = dir / "index.json";
  const fs::path tmp = dir / "index.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << arr.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot move index into place: " + target.string());
}

std::vector<FaceImage> read_index(const fs::path& index_path) {
  const json j = read_json_file(index_path);
  if (!j.is_array()) throw FormatError(index_path.string() + ": expected an array");
  std::vector<FaceImage> out;
  for (const json& e : j) {
    if (!e.is_object() || !e.contains("box")) throw FormatError(index_path.string() + ": bad entry");
    out.push_back(FaceImage{ImageId(string_field(e, "image_id")), string_field(e, "friend_name"),
                            PhotoRef{string_field(e, "photo_id"), {}}, box_from_json(e["box"]),
                            fs::path(string_field(e, "crop_path"))});
  }
  return out;
}

std::vector<ImageId> select_for_registration(std::span<const FaceImage> results,
                                             std::span<const ImageId> chosen) {
  if (chosen.size() != static_cast<std::size_t>(geometry::cells)) {
    throw CardinalityError("select exactly " + std::to_string(geometry::cells) + " images, got " +
                           std::to_string(chosen.size()));
  }
  std::unordered_set<ImageId> known;
  for (const FaceImage& f : results) known.insert(f.image_id);
  std::unordered_set<ImageId> seen;
  for (const ImageId& id : chosen) {
    if (!known.contains(id)) throw UnknownImageError("unknown image id " + id.str());
    if (!seen.insert(id).second) throw DuplicateError("image id chosen twice: " + id.str());
  }
  return {chosen.begin(), chosen.end()};
}

}  // namespace tetrad::bootstrap

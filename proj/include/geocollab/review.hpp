#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "geocollab/geo_anchor.hpp"
#include "geocollab/scene.hpp"
#include "geocollab/session.hpp"

namespace geocollab::review {

inline constexpr std::size_t kMaxCommentChars = 4000;

enum class CommentStatus { open, addressed };
std::string_view to_string(CommentStatus s) noexcept;
std::optional<CommentStatus> status_from_string(std::string_view s) noexcept;

struct SolutionRecord {
  std::string solution_id;
  int version = 1;
  std::string title;
  geo::SceneState scene;
  std::int64_t published_at = 0;
  std::string source_session;
};

struct Comment {
  std::string comment_id;
  std::string solution_id;
  int version = 1;
  std::string author;
  std::string text;
  GeoAnchor anchor;
  std::optional<std::string> parent_id;
  std::int64_t created_at = 0;
  CommentStatus status = CommentStatus::open;

  bool operator==(const Comment&) const = default;
};

struct StatusChange {
  std::string comment_id;
  CommentStatus status = CommentStatus::open;
  std::int64_t at = 0;
};

Json to_json(const SolutionRecord& s, bool with_scene = true);
Json to_json(const Comment& c);
SolutionRecord solution_from_json(const Json& j);
Comment comment_from_json(const Json& j);

/// Latitude/longitude rectangle. min_lon > max_lon wraps across the antimeridian.
struct BBox {
  double min_lat = -90, min_lon = -180, max_lat = 90, max_lon = 180;
  bool contains(double lat, double lon) const noexcept;
};
/// Parses "minLat,minLon,maxLat,maxLon". Throws Error(ValidationError).
BBox parse_bbox(std::string_view s);

struct CommentFilter {
  std::string solution_id;
  std::optional<int> version;
  std::optional<BBox> bbox;
  std::optional<std::int64_t> since;  // created_at >= since
  std::optional<CommentStatus> status;

  bool matches(const Comment& c) const noexcept;
};

using StoreEvent = std::variant<SolutionRecord, Comment, StatusChange>;

/// Persistence backend. append() must not return before the event is durable.
class ReviewStore {
 public:
  virtual ~ReviewStore() = default;
  virtual void append(const StoreEvent& event) = 0;
  /// Every durable event, in append order.
  virtual std::vector<StoreEvent> load() = 0;
};

class MemoryReviewStore final : public ReviewStore {
 public:
  void append(const StoreEvent& event) override { events_.push_back(event); }
  std::vector<StoreEvent> load() override { return events_; }

 private:
  std::vector<StoreEvent> events_;
};

/// JSON-lines log at <dir>/review.jsonl, fsync'd on every append. A torn final
/// line left by a crash is truncated on load.
class FileReviewStore final : public ReviewStore {
 public:
  explicit FileReviewStore(std::filesystem::path dir);
  ~FileReviewStore() override;
  FileReviewStore(const FileReviewStore&) = delete;
  FileReviewStore& operator=(const FileReviewStore&) = delete;

  void append(const StoreEvent& event) override;
  std::vector<StoreEvent> load() override;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

Json event_to_json(const StoreEvent& e);
StoreEvent event_from_json(const Json& j);

/// Versioned published solutions and geo-anchored threaded comments.
/// Thread-safe: writes are serialized, reads run concurrently.
class ReviewService {
 public:
  explicit ReviewService(std::unique_ptr<ReviewStore> store, session::Clock clock = session::system_clock_ms);

  struct Published {
    std::string solution_id;
    int version = 1;
  };
  /// Same (source_session, title) republished gets the next version.
  Published publish_solution(const std::string& source_session, const std::string& title, const geo::SceneState& scene);

  SolutionRecord get_solution(const std::string& solution_id, int version) const;
  /// Every version of every solution, ordered by id then version.
  std::vector<SolutionRecord> list_solutions() const;

  Comment post_comment(const std::string& solution_id, int version, const std::string& author, const std::string& text,
                       const GeoAnchor& anchor, const std::optional<std::string>& parent_id = std::nullopt);
  std::vector<Comment> list_comments(const CommentFilter& filter) const;
  Comment set_comment_status(const std::string& comment_id, CommentStatus status);

  /// Document for loading a solution version's discussion into a design session.
  Json export_comments(const std::string& solution_id, int version) const;

 private:
  void apply(const StoreEvent& e);
  void persist_and_apply(const StoreEvent& e);
  const SolutionRecord& find_solution(const std::string& solution_id, int version) const;

  std::unique_ptr<ReviewStore> store_;
  session::Clock clock_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::vector<SolutionRecord>> solutions_;  // id -> versions 1..n
  std::map<std::pair<std::string, std::string>, std::string> by_origin_;  // (session, title) -> id
  std::map<std::string, Comment> comments_;
  std::map<std::string, std::vector<std::string>> comments_by_solution_;  // in creation order
  std::uint64_t next_solution_ = 1;
  std::uint64_t next_comment_ = 1;
};

}  // namespace geocollab::review

#include "geocollab/review.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "geocollab/error.hpp"

namespace geocollab::review {

std::string_view to_string(CommentStatus s) noexcept { return s == CommentStatus::open ? "open" : "addressed"; }

std::optional<CommentStatus> status_from_string(std::string_view s) noexcept {
  if (s == "open") return CommentStatus::open;
  if (s == "addressed") return CommentStatus::addressed;
  return std::nullopt;
}

// ---- codecs ----

Json to_json(const SolutionRecord& s, bool with_scene) {
  Json j = {{"solution_id", s.solution_id},
            {"version", s.version},
            {"title", s.title},
            {"published_at", s.published_at},
            {"source_session", s.source_session}};
  if (with_scene) j["scene"] = geo::to_json(s.scene);
  return j;
}

Json to_json(const Comment& c) {
  Json j = {{"comment_id", c.comment_id},
            {"solution_id", c.solution_id},
            {"version", c.version},
            {"author", c.author},
            {"text", c.text},
            {"anchor", geocollab::to_json(c.anchor)},
            {"created_at", c.created_at},
            {"status", std::string(to_string(c.status))}};
  if (c.parent_id) j["parent_id"] = *c.parent_id;
  return j;
}

SolutionRecord solution_from_json(const Json& j) {
  SolutionRecord s;
  s.solution_id = json_field::string(j, "solution_id", "");
  s.version = static_cast<int>(json_field::integer(j, "version", ""));
  s.title = json_field::string(j, "title", "");
  s.scene = geo::scene_from_json(json_field::require(j, "scene", ""), "scene");
  s.published_at = json_field::integer(j, "published_at", "");
  s.source_session = json_field::string(j, "source_session", "");
  return s;
}

Comment comment_from_json(const Json& j) {
  Comment c;
  c.comment_id = json_field::string(j, "comment_id", "");
  c.solution_id = json_field::string(j, "solution_id", "");
  c.version = static_cast<int>(json_field::integer(j, "version", ""));
  c.author = json_field::string(j, "author", "");
  c.text = json_field::string(j, "text", "");
  c.anchor = anchor_from_json(json_field::require(j, "anchor", ""), "anchor");
  c.parent_id = json_field::opt_string(j, "parent_id", "");
  c.created_at = json_field::integer(j, "created_at", "");
  const std::string st = json_field::string(j, "status", "");
  auto status = status_from_string(st);
  if (!status) throw Error(Errc::SchemaViolation, "unknown status '" + st + "'", "status");
  c.status = *status;
  return c;
}

Json event_to_json(const StoreEvent& e) {
  if (const auto* s = std::get_if<SolutionRecord>(&e)) return {{"type", "solution"}, {"record", to_json(*s)}};
  if (const auto* c = std::get_if<Comment>(&e)) return {{"type", "comment"}, {"record", to_json(*c)}};
  const auto& st = std::get<StatusChange>(e);
  return {{"type", "status"},
          {"record", {{"comment_id", st.comment_id}, {"status", std::string(to_string(st.status))}, {"at", st.at}}}};
}

StoreEvent event_from_json(const Json& j) {
  const std::string type = json_field::string(j, "type", "");
  const Json& rec = json_field::require(j, "record", "");
  if (type == "solution") return solution_from_json(rec);
  if (type == "comment") return comment_from_json(rec);
  if (type == "status") {
    StatusChange s;
    s.comment_id = json_field::string(rec, "comment_id", "record");
    auto status = status_from_string(json_field::string(rec, "status", "record"));
    if (!status) throw Error(Errc::SchemaViolation, "unknown status", "record.status");
    s.status = *status;
    s.at = json_field::integer(rec, "at", "record");
    return s;
  }
  throw Error(Errc::SchemaViolation, "unknown event type '" + type + "'", "type");
}

// ---- filters ----

bool BBox::contains(double lat, double lon) const noexcept {
  if (lat < min_lat || lat > max_lat) return false;
  if (min_lon <= max_lon) return lon >= min_lon && lon <= max_lon;
  return lon >= min_lon || lon <= max_lon;
}

BBox parse_bbox(std::string_view s) {
  std::vector<double> v;
  std::string item;
  std::stringstream ss{std::string(s)};
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw Error(Errc::ValidationError, "bbox must be four numbers: minLat,minLon,maxLat,maxLon", "bbox");
    }
  }
  if (v.size() != 4 || !std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); }))
    throw Error(Errc::ValidationError, "bbox must be four numbers: minLat,minLon,maxLat,maxLon", "bbox");
  BBox b{v[0], v[1], v[2], v[3]};
  if (b.min_lat > b.max_lat) throw Error(Errc::ValidationError, "bbox minLat exceeds maxLat", "bbox");
  return b;
}

bool CommentFilter::matches(const Comment& c) const noexcept {
  if (c.solution_id != solution_id) return false;
  if (version && c.version != *version) return false;
  if (bbox && !bbox->contains(c.anchor.lat, c.anchor.lon)) return false;
  if (since && c.created_at < *since) return false;
  if (status && c.status != *status) return false;
  return true;
}

// ---- FileReviewStore ----

namespace {

[[noreturn]] void store_failure(const std::string& what) {
  throw Error(Errc::StoreFailure, what + ": " + std::strerror(errno));
}

std::uint64_t numeric_suffix(const std::string& id) {
  auto dash = id.rfind('-');
  if (dash == std::string::npos) return 0;
  try {
    return std::stoull(id.substr(dash + 1));
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace

FileReviewStore::FileReviewStore(std::filesystem::path dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::StoreFailure, "cannot create store directory " + dir.string() + ": " + ec.message());
  path_ = dir / "review.jsonl";
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) store_failure("cannot open " + path_.string());
}

FileReviewStore::~FileReviewStore() {
  if (fd_ >= 0) ::close(fd_);
}

void FileReviewStore::append(const StoreEvent& event) {
  std::string line = event_to_json(event).dump();
  line += '\n';
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    ssize_t n = ::write(fd_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      store_failure("append to " + path_.string());
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fdatasync(fd_) != 0) store_failure("fdatasync " + path_.string());
}

std::vector<StoreEvent> FileReviewStore::load() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error(Errc::StoreFailure, "cannot read " + path_.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const auto last_newline = data.rfind('\n');
  const std::size_t complete = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (complete != data.size()) {
    // Drop a torn final write.
    if (::ftruncate(fd_, static_cast<off_t>(complete)) != 0) store_failure("truncate " + path_.string());
    data.resize(complete);
  }

  std::vector<StoreEvent> events;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < data.size()) {
    const std::size_t end = data.find('\n', start);
    ++line_no;
    std::string_view line(data.data() + start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::StoreFailure, path_.string() + ":" + std::to_string(line_no) + " is corrupt");
    try {
      events.push_back(event_from_json(j));
    } catch (const Error& e) {
      throw Error(Errc::StoreFailure, path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return events;
}

// ---- ReviewService ----

ReviewService::ReviewService(std::unique_ptr<ReviewStore> store, session::Clock clock)
    : store_(std::move(store)), clock_(std::move(clock)) {
  for (const auto& e : store_->load()) apply(e);
}

void ReviewService::apply(const StoreEvent& e) {
  if (const auto* s = std::get_if<SolutionRecord>(&e)) {
    solutions_[s->solution_id].push_back(*s);
    by_origin_[{s->source_session, s->title}] = s->solution_id;
    next_solution_ = std::max(next_solution_, numeric_suffix(s->solution_id) + 1);
  } else if (const auto* c = std::get_if<Comment>(&e)) {
    comments_[c->comment_id] = *c;
    comments_by_solution_[c->solution_id].push_back(c->comment_id);
    next_comment_ = std::max(next_comment_, numeric_suffix(c->comment_id) + 1);
  } else {
    const auto& st = std::get<StatusChange>(e);
    if (auto it = comments_.find(st.comment_id); it != comments_.end()) it->second.status = st.status;
  }
}

void ReviewService::persist_and_apply(const StoreEvent& e) {
  store_->append(e);
  apply(e);
}

const SolutionRecord& ReviewService::find_solution(const std::string& solution_id, int version) const {
  auto it = solutions_.find(solution_id);
  if (it == solutions_.end() || version < 1 || static_cast<std::size_t>(version) > it->second.size())
    throw Error(Errc::UnknownSolution, "no solution '" + solution_id + "' version " + std::to_string(version));
  return it->second[static_cast<std::size_t>(version) - 1];
}

ReviewService::Published ReviewService::publish_solution(const std::string& source_session, const std::string& title,
                                                         const geo::SceneState& scene) {
  if (title.empty() || utf8_length(title) > 200) throw Error(Errc::ValidationError, "title must be 1..200 characters", "title");
  if (source_session.empty()) throw Error(Errc::ValidationError, "source_session must not be empty", "source_session");

  std::unique_lock lock(mutex_);
  SolutionRecord rec;
  rec.title = title;
  rec.scene = scene;
  rec.source_session = source_session;
  rec.published_at = clock_();
  if (auto it = by_origin_.find({source_session, title}); it != by_origin_.end()) {
    rec.solution_id = it->second;
    rec.version = static_cast<int>(solutions_.at(it->second).size()) + 1;
  } else {
    rec.solution_id = "sol-" + std::to_string(next_solution_);
    rec.version = 1;
  }
  persist_and_apply(rec);
  return {rec.solution_id, rec.version};
}

SolutionRecord ReviewService::get_solution(const std::string& solution_id, int version) const {
  std::shared_lock lock(mutex_);
  return find_solution(solution_id, version);
}

std::vector<SolutionRecord> ReviewService::list_solutions() const {
  std::shared_lock lock(mutex_);
  std::vector<SolutionRecord> out;
  for (const auto& [id, versions] : solutions_) out.insert(out.end(), versions.begin(), versions.end());
  return out;
}

Comment ReviewService::post_comment(const std::string& solution_id, int version, const std::string& author,
                                    const std::string& text, const GeoAnchor& anchor,
                                    const std::optional<std::string>& parent_id) {
  if (text.empty() || utf8_length(text) > kMaxCommentChars)
    throw Error(Errc::ValidationError, "text must be 1..4000 characters", "text");
  if (utf8_length(author) > 64) throw Error(Errc::ValidationError, "author must be at most 64 characters", "author");
  if (!is_valid(anchor)) throw Error(Errc::ValidationError, "anchor out of range", "anchor");

  std::unique_lock lock(mutex_);
  find_solution(solution_id, version);
  if (parent_id) {
    auto it = comments_.find(*parent_id);
    if (it == comments_.end() || it->second.solution_id != solution_id)
      throw Error(Errc::UnknownParent, "no comment '" + *parent_id + "' on solution '" + solution_id + "'");
  }
  Comment c;
  c.comment_id = "c-" + std::to_string(next_comment_);
  c.solution_id = solution_id;
  c.version = version;
  c.author = author.empty() ? "anonymous" : author;
  c.text = text;
  c.anchor = anchor;
  c.parent_id = parent_id;
  c.created_at = clock_();
  c.status = CommentStatus::open;
  persist_and_apply(c);
  return c;
}

std::vector<Comment> ReviewService::list_comments(const CommentFilter& filter) const {
  std::shared_lock lock(mutex_);
  if (!solutions_.contains(filter.solution_id))
    throw Error(Errc::UnknownSolution, "no solution '" + filter.solution_id + "'");
  if (filter.version) find_solution(filter.solution_id, *filter.version);

  std::vector<Comment> out;
  if (auto it = comments_by_solution_.find(filter.solution_id); it != comments_by_solution_.end()) {
    for (const auto& id : it->second) {
      const Comment& c = comments_.at(id);
      if (filter.matches(c)) out.push_back(c);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Comment& a, const Comment& b) { return a.created_at < b.created_at; });
  return out;
}

Comment ReviewService::set_comment_status(const std::string& comment_id, CommentStatus status) {
  std::unique_lock lock(mutex_);
  auto it = comments_.find(comment_id);
  if (it == comments_.end()) throw Error(Errc::UnknownComment, "no comment '" + comment_id + "'");
  if (it->second.status != status) persist_and_apply(StatusChange{comment_id, status, clock_()});
  return it->second;
}

Json ReviewService::export_comments(const std::string& solution_id, int version) const {
  SolutionRecord rec = get_solution(solution_id, version);
  CommentFilter f;
  f.solution_id = solution_id;
  f.version = version;
  Json comments = Json::array();
  for (const auto& c : list_comments(f)) comments.push_back(to_json(c));
  return {{"solution_id", solution_id},
          {"version", version},
          {"title", rec.title},
          {"source_session", rec.source_session},
          {"comments", std::move(comments)}};
}

}  // namespace geocollab::review

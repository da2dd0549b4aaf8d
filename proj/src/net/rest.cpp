#include "geocollab/rest.hpp"

#include <charconv>
#include <map>
#include <vector>

#include "geocollab/error.hpp"

namespace geocollab::sync {

using review::CommentFilter;
using review::CommentStatus;

namespace {

HttpReply reply(int status, const Json& body) { return {status, body.dump()}; }

HttpReply error_reply(const Error& e) {
  int status = 400;
  switch (e.code()) {
    case Errc::UnknownSolution:
    case Errc::UnknownParent:
    case Errc::UnknownComment:
      status = 404;
      break;
    case Errc::StoreFailure: status = 500; break;
    default: break;
  }
  Json err = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
  if (!e.field().empty()) err["field"] = e.field();
  return reply(status, {{"error", err}});
}

HttpReply simple_error(int status, std::string_view code, std::string message) {
  return reply(status, {{"error", {{"code", code}, {"message", std::move(message)}}}});
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto end = path.find('/', start);
    const auto piece = path.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    if (!piece.empty()) parts.push_back(percent_decode(piece));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return parts;
}

std::map<std::string, std::string> parse_query(std::string_view q) {
  std::map<std::string, std::string> out;
  std::size_t start = 0;
  while (start < q.size()) {
    auto end = q.find('&', start);
    if (end == std::string_view::npos) end = q.size();
    const auto pair = q.substr(start, end - start);
    const auto eq = pair.find('=');
    if (!pair.empty()) {
      if (eq == std::string_view::npos) out[percent_decode(pair)] = "";
      else out[percent_decode(pair.substr(0, eq))] = percent_decode(pair.substr(eq + 1));
    }
    start = end + 1;
  }
  return out;
}

Json parse_body(const std::string& body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::ValidationError, "request body must be a JSON object");
  return j;
}

int parse_version(const std::string& s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v < 1)
    throw Error(Errc::UnknownSolution, "version must be a positive integer");
  return v;
}

std::int64_t parse_int64(const std::string& s, const char* name) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(Errc::ValidationError, std::string(name) + " must be an integer", name);
  return v;
}

// Schema errors from the shared field helpers become validation errors here.
template <class F>
auto validated(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::SchemaViolation || e.code() == Errc::InvariantViolation)
      throw Error(Errc::ValidationError, e.what(), e.field());
    throw;
  }
}

HttpReply publish(review::ReviewService& svc, const std::string& body) {
  const Json j = parse_body(body);
  const auto [source, title, scene] = validated([&] {
    return std::tuple{json_field::string(j, "source_session", ""), json_field::string(j, "title", ""),
                      j.contains("scene") ? geo::scene_from_json(j.at("scene"), "scene") : geo::SceneState{}};
  });
  const auto pub = svc.publish_solution(source, title, scene);
  return reply(201, review::to_json(svc.get_solution(pub.solution_id, pub.version), false));
}

HttpReply post_comment(review::ReviewService& svc, const std::string& id, int version, const std::string& body) {
  const Json j = parse_body(body);
  return validated([&] {
    const std::string author = json_field::opt_string(j, "author", "").value_or("");
    const std::string text = json_field::string(j, "text", "");
    const GeoAnchor anchor = anchor_from_json(json_field::require(j, "anchor", ""), "anchor");
    const auto parent = json_field::opt_string(j, "parent_id", "");
    return reply(201, review::to_json(svc.post_comment(id, version, author, text, anchor, parent)));
  });
}

HttpReply list_comments(review::ReviewService& svc, const std::string& id, int version, std::string_view query) {
  CommentFilter f;
  f.solution_id = id;
  f.version = version;
  const auto q = parse_query(query);
  if (auto it = q.find("bbox"); it != q.end() && !it->second.empty()) f.bbox = review::parse_bbox(it->second);
  if (auto it = q.find("since"); it != q.end() && !it->second.empty()) f.since = parse_int64(it->second, "since");
  if (auto it = q.find("status"); it != q.end() && !it->second.empty()) {
    f.status = review::status_from_string(it->second);
    if (!f.status) throw Error(Errc::ValidationError, "status must be open or addressed", "status");
  }
  Json arr = Json::array();
  for (const auto& c : svc.list_comments(f)) arr.push_back(review::to_json(c));
  return reply(200, arr);
}

HttpReply patch_comment(review::ReviewService& svc, const std::string& id, const std::string& body) {
  const Json j = parse_body(body);
  const std::string s = validated([&] { return json_field::string(j, "status", ""); });
  const auto status = review::status_from_string(s);
  if (!status) throw Error(Errc::ValidationError, "status must be open or addressed", "status");
  return reply(200, review::to_json(svc.set_comment_status(id, *status)));
}

}  // namespace

std::string percent_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      int v = 0;
      const auto [ptr, ec] = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
      if (ec == std::errc{} && ptr == s.data() + i + 3) {
        out += static_cast<char>(v);
        i += 2;
        continue;
      }
    }
    out += s[i] == '+' ? ' ' : s[i];
  }
  return out;
}

std::optional<HttpReply> handle_review_api(review::ReviewService& svc, std::string_view method,
                                           std::string_view target, const std::string& body) {
  const auto qpos = target.find('?');
  const std::string_view path = target.substr(0, qpos);
  const std::string_view query = qpos == std::string_view::npos ? std::string_view{} : target.substr(qpos + 1);
  if (path != "/api" && !path.starts_with("/api/")) return std::nullopt;

  const auto parts = split_path(path);
  auto wrong_method = [&] { return simple_error(405, "MethodNotAllowed", std::string(method) + " not allowed here"); };
  try {
    if (parts.size() == 2 && parts[1] == "solutions") {
      if (method == "POST") return publish(svc, body);
      if (method == "GET") {
        Json arr = Json::array();
        for (const auto& s : svc.list_solutions()) arr.push_back(review::to_json(s, false));
        return reply(200, arr);
      }
      return wrong_method();
    }
    if (parts.size() == 4 && parts[1] == "solutions") {
      if (method != "GET") return wrong_method();
      return reply(200, review::to_json(svc.get_solution(parts[2], parse_version(parts[3]))));
    }
    if (parts.size() == 5 && parts[1] == "solutions" && parts[4] == "comments") {
      const int version = parse_version(parts[3]);
      if (method == "POST") return post_comment(svc, parts[2], version, body);
      if (method == "GET") return list_comments(svc, parts[2], version, query);
      return wrong_method();
    }
    if (parts.size() == 3 && parts[1] == "comments") {
      if (method != "PATCH") return wrong_method();
      return patch_comment(svc, parts[2], body);
    }
    return simple_error(404, "NotFound", "no route for " + std::string(path));
  } catch (const Error& e) {
    return error_reply(e);
  }
}

}  // namespace geocollab::sync

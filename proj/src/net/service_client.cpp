#include "service_client.hpp"

#include <chrono>

#include <httplib.h>

#include "geocollab/error.hpp"

namespace geocollab::sync {

namespace {

Json failure(Errc code, std::string message) {
  return {{"ok", false}, {"error", {{"code", std::string(to_string(code))}, {"message", std::move(message)}}}};
}

}  // namespace

Json call_external_service(const std::string& url, const Json& params, std::int64_t timeout_ms) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(base);
  if (!client.is_valid()) return failure(Errc::ServiceError, "invalid service URL '" + url + "'");
  const auto timeout = std::chrono::milliseconds(timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(path, params.dump(), "application/json");
  if (!res) {
    const auto elapsed = std::chrono::steady_clock::now() - started;
    if (res.error() == httplib::Error::ConnectionTimeout || elapsed >= timeout * 9 / 10)
      return failure(Errc::ServiceTimeout, "no response within " + std::to_string(timeout_ms) + " ms");
    return failure(Errc::ServiceError, "request failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300)
    return failure(Errc::ServiceError, "status " + std::to_string(res->status));
  Json body = Json::parse(res->body, nullptr, false);
  if (body.is_discarded()) return failure(Errc::ServiceError, "response is not JSON");
  return {{"ok", true}, {"result", std::move(body)}};
}

}  // namespace geocollab::sync

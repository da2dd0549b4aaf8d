#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "geocollab/review.hpp"

namespace geocollab::sync {

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

/// The review REST API. Returns nullopt when `target` is outside /api/.
///
///   POST  /api/solutions                                   -> 201
///   GET   /api/solutions                                   -> 200
///   GET   /api/solutions/{id}/{version}                    -> 200
///   POST  /api/solutions/{id}/{version}/comments           -> 201
///   GET   /api/solutions/{id}/{version}/comments?bbox=&since=&status=
///   PATCH /api/comments/{id}                               -> 200
///
/// Failures carry {"error":{"code","message","field"?}} with 400 for
/// validation, 404 for unknown ids or routes, 405 for a wrong method and 500
/// for storage errors.
std::optional<HttpReply> handle_review_api(review::ReviewService& service, std::string_view method,
                                           std::string_view target, const std::string& body);

std::string percent_decode(std::string_view s);

}  // namespace geocollab::sync

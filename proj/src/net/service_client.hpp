#pragma once

#include <cstdint>
#include <string>

#include "geocollab/geo_anchor.hpp"

namespace geocollab::sync {

/// POSTs `params` to `url` and returns the op_result fields describing the
/// outcome: {"ok":true,"result":...} or {"ok":false,"error":{code,message}}.
Json call_external_service(const std::string& url, const Json& params, std::int64_t timeout_ms);

}  // namespace geocollab::sync

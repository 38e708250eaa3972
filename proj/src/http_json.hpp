#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace enthymeme::detail {

// POSTs a JSON body to an http:// URL and parses the JSON reply. Connection
// failures and 5xx replies raise a retryable BackendError; other non-2xx
// replies and unparseable bodies raise a non-retryable one.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_seconds);

}  // namespace enthymeme::detail

#include "http_json.hpp"

#include <httplib.h>

#include <regex>

#include "enthymeme/error.hpp"

namespace enthymeme::detail {

nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_seconds) {
  static const std::regex kUrl(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) {
    throw BackendError("unsupported backend URL (expected http://host[:port]/path): " + url, false);
  }
  const std::string path = m[2].matched ? m[2].str() : "/";

  httplib::Client client(m[1].str());
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);

  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw BackendError("backend unavailable at " + url + ": " + httplib::to_string(res.error()));
  }
  if (res->status >= 500) {
    throw BackendError("backend " + url + " returned HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError("backend " + url + " rejected request with HTTP " +
                           std::to_string(res->status) + ": " + res->body,
                       false);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw BackendError("backend " + url + " returned invalid JSON: " + e.what(), false);
  }
}

}  // namespace enthymeme::detail

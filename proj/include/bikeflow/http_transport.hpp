#pragma once

#include <map>
#include <memory>
#include <string>

#include <json.hpp>

namespace bikeflow {

/// "http(s)://host[:port][/prefix]" split into the pieces httplib wants.
struct Endpoint {
    std::string scheme_host_port;
    std::string path_prefix;

    [[nodiscard]] static Endpoint parse(const std::string& url);
};

struct HttpResult {
    int status = 0;
    std::string body;
    std::string content_type;
};

/// Thin blocking client. Transport failures surface as ProviderError
/// (timeout / unavailable); HTTP status codes are left to the caller except
/// through `raise_for_status`.
class HttpTransport {
  public:
    HttpTransport(const std::string& endpoint_url, double timeout_s, std::string bearer_token = {});
    ~HttpTransport();
    HttpTransport(const HttpTransport&) = delete;
    HttpTransport& operator=(const HttpTransport&) = delete;

    HttpResult get(const std::string& path, const std::multimap<std::string, std::string>& query = {});
    HttpResult post_json(const std::string& path, const nlohmann::json& body);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Maps 401/403 to auth_failure, 429 to rate_limited, 5xx to unavailable and
/// other non-2xx to invalid_request.
void raise_for_status(const HttpResult& result, const std::string& what);

[[nodiscard]] nlohmann::json parse_json_body(const HttpResult& result, const std::string& what);

}  // namespace bikeflow

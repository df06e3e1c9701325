#include "bikeflow/http_transport.hpp"

#include <httplib.h>

#include <chrono>

#include "bikeflow/providers.hpp"

namespace bikeflow {

Endpoint Endpoint::parse(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw PreconditionError("validation", "endpoint '" + url + "' lacks a scheme");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    if (path_start == std::string::npos) {
        e.scheme_host_port = url;
    } else {
        e.scheme_host_port = url.substr(0, path_start);
        e.path_prefix = url.substr(path_start);
        while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
    }
    return e;
}

struct HttpTransport::Impl {
    Endpoint endpoint;
    httplib::Client client;
    httplib::Headers headers;

    Impl(const std::string& url, double timeout_s, const std::string& token)
        : endpoint(Endpoint::parse(url)), client(endpoint.scheme_host_port) {
        const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(timeout_s));
        const auto sec = static_cast<time_t>(timeout.count() / 1000000);
        const auto usec = static_cast<time_t>(timeout.count() % 1000000);
        client.set_connection_timeout(sec, usec);
        client.set_read_timeout(sec, usec);
        client.set_write_timeout(sec, usec);
        client.set_keep_alive(false);
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
    }

    static HttpResult convert(const httplib::Result& res, const std::string& what) {
        if (!res) {
            const auto err = res.error();
            const auto kind = (err == httplib::Error::Read || err == httplib::Error::Write ||
                               err == httplib::Error::ConnectionTimeout)
                                  ? ProviderErrorKind::timeout
                                  : ProviderErrorKind::unavailable;
            throw ProviderError(kind, what + ": " + httplib::to_string(err));
        }
        return {res->status, res->body, res->get_header_value("Content-Type")};
    }
};

HttpTransport::HttpTransport(const std::string& endpoint_url, double timeout_s, std::string bearer_token)
    : impl_(std::make_unique<Impl>(endpoint_url, timeout_s, bearer_token)) {}

HttpTransport::~HttpTransport() = default;

HttpResult HttpTransport::get(const std::string& path, const std::multimap<std::string, std::string>& query) {
    httplib::Params params(query.begin(), query.end());
    const std::string full = impl_->endpoint.path_prefix + path;
    return Impl::convert(impl_->client.Get(full, params, impl_->headers), "GET " + full);
}

HttpResult HttpTransport::post_json(const std::string& path, const nlohmann::json& body) {
    const std::string full = impl_->endpoint.path_prefix + path;
    return Impl::convert(impl_->client.Post(full, impl_->headers, body.dump(), "application/json"), "POST " + full);
}

void raise_for_status(const HttpResult& result, const std::string& what) {
    const int s = result.status;
    if (s >= 200 && s < 300) return;
    const std::string msg = what + ": HTTP " + std::to_string(s);
    if (s == 401 || s == 403) throw ProviderError(ProviderErrorKind::auth_failure, msg);
    if (s == 429) throw ProviderError(ProviderErrorKind::rate_limited, msg);
    if (s >= 500) throw ProviderError(ProviderErrorKind::unavailable, msg);
    throw ProviderError(ProviderErrorKind::invalid_request, msg);
}

nlohmann::json parse_json_body(const HttpResult& result, const std::string& what) {
    try {
        return nlohmann::json::parse(result.body);
    } catch (const nlohmann::json::parse_error&) {
        throw ProviderError(ProviderErrorKind::malformed_response, what + ": response is not JSON");
    }
}

}  // namespace bikeflow

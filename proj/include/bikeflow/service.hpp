#pragma once

#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "bikeflow/config.hpp"
#include "bikeflow/ingest.hpp"
#include "bikeflow/orchestrator.hpp"

namespace bikeflow {

enum class ApiErrorCode { not_found, illegal_transition, validation, provider_failure, integrity };

[[nodiscard]] std::string_view to_string(ApiErrorCode code);

struct ApiError {
    ApiErrorCode code = ApiErrorCode::validation;
    std::string message;
    std::optional<std::string> stage;
    std::string detail;  // the engine's own error code

    /// not_found 404, illegal_transition 409, validation 400,
    /// provider_failure 502, integrity 500.
    [[nodiscard]] int http_status() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Classifies any engine exception.
[[nodiscard]] ApiError api_error_from(const std::exception& e);

/// Agent selection per evaluated run, keyed by run id; runs whose pool
/// produced no selection map to "none".
[[nodiscard]] std::map<std::string, std::string> agent_picks(const RunStore& store);

struct ServiceDeps {
    std::shared_ptr<Engine> engine;
    std::shared_ptr<QcStore> qc;
    std::shared_ptr<ImagerySource> imagery;
    std::shared_ptr<Sleeper> sleeper;
    IngestOptions ingest_defaults;
    RetryPolicy imagery_retry;
    std::string api_token;  // empty disables auth
};

/// The JSON API over one engine and QC store.
class Service {
  public:
    explicit Service(ServiceDeps deps);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves on a background thread; port 0 picks a free port.
    /// Returns the bound port.
    int start(const std::string& host, int port);
    /// Serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace bikeflow

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "bikeflow/ingest.hpp"
#include "bikeflow/orchestrator.hpp"
#include "bikeflow/providers.hpp"
#include "bikeflow/templates.hpp"

namespace bikeflow {

enum class ProviderMode { mock, http, record, replay };

[[nodiscard]] ProviderMode provider_mode_from_string(std::string_view text);
[[nodiscard]] std::string_view to_string(ProviderMode mode);

inline constexpr const char* kProviderRoles[] = {"editor", "locator", "optimizer", "judge", "embedder", "segmenter"};

struct ProvidersSettings {
    ProviderMode mode = ProviderMode::mock;
    std::uint64_t seed = 0;
    std::filesystem::path fixtures_dir = "fixtures";
    std::map<std::string, ProviderConfig> roles;  // keyed by kProviderRoles
    RetryPolicy retry;
    int concurrency = 4;
};

struct ImagerySettings {
    std::string source = "street_view";  // or "synthetic"
    ProviderConfig api;
    IngestOptions options;
};

struct ServiceSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string token_ref;  // environment variable holding the shared API token; empty disables auth
};

struct AppConfig {
    EngineConfig engine;
    std::filesystem::path qc_dir = "qc";
    std::filesystem::path templates_dir;  // empty: compiled-in templates
    ProvidersSettings providers;
    ImagerySettings imagery;
    ServiceSettings service;
};

/// JSON with `//` comments allowed. Unknown top-level keys are rejected.
[[nodiscard]] AppConfig config_from_json(const nlohmann::json& j);
[[nodiscard]] AppConfig load_config(const std::filesystem::path& path);
[[nodiscard]] AppConfig default_config();

[[nodiscard]] TemplateLibrary load_templates(const AppConfig& config);

/// Provider set for the configured mode, wrapped with retries, per-role
/// concurrency limits and contract checks.
[[nodiscard]] ProviderSet build_providers(const ProvidersSettings& settings, std::shared_ptr<Sleeper> sleeper);

[[nodiscard]] std::unique_ptr<ImagerySource> build_imagery(const ImagerySettings& settings, std::uint64_t seed);

}  // namespace bikeflow

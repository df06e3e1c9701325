#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "bikeflow/providers.hpp"

namespace bikeflow {

/// Content-addressed store of recorded provider exchanges.
///
/// Layout: `<root>/<role>/<op>/<request-hash>.json`, where the hash is the
/// SHA-256 of the canonical (sorted-key, compact) JSON request. Each file
/// holds `{"request": ..., "response": ...}`; images travel as base64 PNG.
class FixtureStore {
  public:
    explicit FixtureStore(std::filesystem::path root) : root_(std::move(root)) {}

    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }

    [[nodiscard]] static std::string request_hash(const nlohmann::json& request);
    [[nodiscard]] std::filesystem::path path_for(const std::string& role, const nlohmann::json& request) const;

    void put(const std::string& role, const nlohmann::json& request, const nlohmann::json& response) const;
    [[nodiscard]] std::optional<nlohmann::json> get(const std::string& role, const nlohmann::json& request) const;

  private:
    std::filesystem::path root_;
};

/// Canonical request descriptions. Images are referenced by content hash.
namespace fixture_request {
[[nodiscard]] nlohmann::json edit(const Image& image, const std::string& prompt, int n, const EditOptions& options);
[[nodiscard]] nlohmann::json describe(const Image& image, const std::string& system_prompt, const std::string& user_prompt);
[[nodiscard]] nlohmann::json judge(const Image& image, const std::string& prompt);
[[nodiscard]] nlohmann::json embed(const Image& image);
[[nodiscard]] nlohmann::json segment(const Image& image);
}  // namespace fixture_request

/// Wraps every role so live responses are written to the store.
[[nodiscard]] ProviderSet record_providers(const ProviderSet& inner, std::shared_ptr<FixtureStore> store);

/// Serves every role from the store; a missing entry raises fixture_miss.
/// Never touches the network.
[[nodiscard]] ProviderSet replay_providers(std::shared_ptr<FixtureStore> store);

}  // namespace bikeflow

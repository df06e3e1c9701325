#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bikeflow/clock.hpp"
#include "bikeflow/domain.hpp"
#include "bikeflow/providers.hpp"

namespace bikeflow {

inline constexpr double kDefaultPitch = 0.0;  // unstated in the source study
inline constexpr double kDefaultFov = 90.0;   // unstated in the source study

struct AcquisitionRequest {
    std::string location_id;
    double latitude = 0.0;
    double longitude = 0.0;
    std::vector<double> headings{0.0, 90.0, 180.0, 270.0};
    double pitch = kDefaultPitch;
    double fov = kDefaultFov;
    int size = kStreetViewSize;

    /// Throws PreconditionError("validation") naming the first violation.
    void validate() const;
};

/// Street-level imagery backend.
class ImagerySource {
  public:
    virtual ~ImagerySource() = default;
    /// Throws ProviderError(no_imagery) when the location has no coverage.
    virtual void check_coverage(const AcquisitionRequest& request) = 0;
    virtual Image fetch(const AcquisitionRequest& request, double heading) = 0;
};

/// Street View Static API: `<endpoint>/metadata` for coverage, `<endpoint>`
/// for the image. The API key is read from the environment variable named
/// by `credential_ref`.
class StreetViewSource final : public ImagerySource {
  public:
    explicit StreetViewSource(ProviderConfig config);

    void check_coverage(const AcquisitionRequest& request) override;
    Image fetch(const AcquisitionRequest& request, double heading) override;

  private:
    ProviderConfig config_;
    std::string key_;
};

/// Offline source rendering synthetic streets; deterministic per
/// (seed, location, heading).
class SyntheticImagerySource final : public ImagerySource {
  public:
    explicit SyntheticImagerySource(std::uint64_t seed = 0, std::set<std::string> uncovered_locations = {});

    void check_coverage(const AcquisitionRequest& request) override;
    Image fetch(const AcquisitionRequest& request, double heading) override;

  private:
    std::uint64_t seed_;
    std::set<std::string> uncovered_;
};

/// "<location>-h090" style ids.
[[nodiscard]] std::string scene_id_for(const std::string& location_id, double heading);

/// One scene per heading, all sharing pitch, fov and size. Transient
/// upstream errors are retried per `policy`.
[[nodiscard]] std::vector<StreetScene> fetch_views(const AcquisitionRequest& request, ImagerySource& source,
                                                   const RetryPolicy& policy, Sleeper& sleeper);

/// Scene metadata without pixels; `image_hash` identifies the stored image.
[[nodiscard]] nlohmann::json scene_metadata(const StreetScene& scene);

struct QCItem {
    std::string item_id;  // "<location>-v<version>"
    std::string location_id;
    int version = 1;
    std::vector<nlohmann::json> candidates;  // scene metadata
    std::optional<std::string> chosen;
    std::string reviewer;
    std::string decided_at;

    [[nodiscard]] bool decided() const noexcept { return chosen.has_value(); }
    [[nodiscard]] bool has_candidate(const std::string& scene_id) const;
};

[[nodiscard]] nlohmann::json to_json(const QCItem& item);

/// Append-only JSON-lines log at `<root>/qc.jsonl`, scene images at
/// `<root>/scenes/<scene_id>-<hash12>.png`.
class QcStore {
  public:
    explicit QcStore(std::filesystem::path root, std::shared_ptr<Clock> clock = std::make_shared<SystemClock>());

    /// New undecided item; a location seen before gets the next version.
    QCItem enqueue(const std::vector<StreetScene>& scenes);
    /// Errors: not_found, unknown_scene, already_decided.
    QCItem record_choice(const std::string& item_id, const std::string& scene_id, const std::string& reviewer);

    [[nodiscard]] std::vector<QCItem> items() const;
    [[nodiscard]] QCItem item(const std::string& item_id) const;
    [[nodiscard]] std::vector<nlohmann::json> history() const;
    [[nodiscard]] Image scene_image(const std::string& item_id, const std::string& scene_id) const;

    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }

  private:
    [[nodiscard]] std::vector<QCItem> replay_locked() const;
    void append_locked(const nlohmann::json& record);

    std::filesystem::path root_;
    std::shared_ptr<Clock> clock_;
    mutable std::mutex mutex_;
};

struct ManifestEntry {
    std::string location_id;
    double latitude = 0.0;
    double longitude = 0.0;
    std::string context_tag;
};

/// CSV with header `location_id,lat,lon,context_tag`.
[[nodiscard]] std::vector<ManifestEntry> parse_manifest(std::string_view csv);
[[nodiscard]] std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

struct IngestOptions {
    std::vector<double> headings{0.0, 90.0, 180.0, 270.0};
    double pitch = kDefaultPitch;
    double fov = kDefaultFov;
    int size = kStreetViewSize;
};

struct IngestSummary {
    std::vector<std::string> enqueued;  // item ids
    std::vector<std::string> no_imagery;  // location ids
    std::vector<std::string> failed;      // "location: message"

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Fetches every manifest location and enqueues its views. Locations
/// without coverage are reported and nothing is enqueued for them.
[[nodiscard]] IngestSummary ingest_locations(const std::vector<ManifestEntry>& entries, const IngestOptions& options,
                                             ImagerySource& source, QcStore& store, const RetryPolicy& policy,
                                             Sleeper& sleeper);

}  // namespace bikeflow

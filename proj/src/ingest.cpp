#include "bikeflow/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "bikeflow/csv.hpp"
#include "bikeflow/digest.hpp"
#include "bikeflow/http_transport.hpp"
#include "bikeflow/lane_sketch.hpp"

namespace bikeflow {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.7g", v);
    return buf;
}

std::string image_file(const std::string& scene_id, const std::string& hash) {
    return "scenes/" + scene_id + "-" + hash.substr(0, 12) + ".png";
}

}  // namespace

void AcquisitionRequest::validate() const {
    if (location_id.empty()) throw PreconditionError("validation", "location_id must be non-empty");
    if (!(latitude >= -90.0 && latitude <= 90.0) || !(longitude >= -180.0 && longitude <= 180.0)) {
        throw PreconditionError("validation", "coordinates out of range");
    }
    if (headings.empty()) throw PreconditionError("validation", "at least one heading is required");
    for (double h : headings) {
        if (!(h >= 0.0 && h < 360.0)) throw PreconditionError("validation", "heading " + fmt_double(h) + " outside [0,360)");
    }
    if (!(pitch >= -90.0 && pitch <= 90.0)) throw PreconditionError("validation", "pitch outside [-90,90]");
    if (!(fov > 0.0 && fov <= 120.0)) throw PreconditionError("validation", "fov outside (0,120]");
    if (size < 1) throw PreconditionError("validation", "size must be positive");
}

StreetViewSource::StreetViewSource(ProviderConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) config_.endpoint = "https://maps.googleapis.com/maps/api/streetview";
    config_.validate();
    if (!config_.credential_ref.empty()) {
        const char* value = std::getenv(config_.credential_ref.c_str());
        if (value == nullptr || *value == '\0') {
            throw ProviderError(ProviderErrorKind::auth_failure,
                                "credential variable " + config_.credential_ref + " is not set");
        }
        key_ = value;
    }
}

void StreetViewSource::check_coverage(const AcquisitionRequest& request) {
    HttpTransport http(config_.endpoint, config_.timeout_s);
    std::multimap<std::string, std::string> q{
        {"location", fmt_double(request.latitude) + "," + fmt_double(request.longitude)}};
    if (!key_.empty()) q.emplace("key", key_);
    const auto result = http.get("/metadata", q);
    raise_for_status(result, "street view metadata");
    const json body = parse_json_body(result, "street view metadata");
    const std::string status = body.value("status", "");
    if (status == "OK") return;
    if (status == "ZERO_RESULTS" || status == "NOT_FOUND") {
        throw ProviderError(ProviderErrorKind::no_imagery, "no street-level imagery at " + request.location_id);
    }
    if (status == "OVER_QUERY_LIMIT") throw ProviderError(ProviderErrorKind::rate_limited, "street view quota exceeded");
    if (status == "REQUEST_DENIED") throw ProviderError(ProviderErrorKind::auth_failure, "street view request denied");
    if (status == "INVALID_REQUEST") throw ProviderError(ProviderErrorKind::invalid_request, "street view rejected the request");
    throw ProviderError(ProviderErrorKind::unavailable, "street view metadata status " + status);
}

Image StreetViewSource::fetch(const AcquisitionRequest& request, double heading) {
    HttpTransport http(config_.endpoint, config_.timeout_s);
    std::multimap<std::string, std::string> q{
        {"size", std::to_string(request.size) + "x" + std::to_string(request.size)},
        {"location", fmt_double(request.latitude) + "," + fmt_double(request.longitude)},
        {"heading", fmt_double(heading)},
        {"pitch", fmt_double(request.pitch)},
        {"fov", fmt_double(request.fov)},
        {"return_error_code", "true"},
    };
    if (!key_.empty()) q.emplace("key", key_);
    const auto result = http.get("", q);
    if (result.status == 404) throw ProviderError(ProviderErrorKind::no_imagery, "no imagery for " + request.location_id);
    raise_for_status(result, "street view image");
    Image img;
    try {
        img = decode_image({reinterpret_cast<const std::uint8_t*>(result.body.data()), result.body.size()});
    } catch (const Error& e) {
        throw ProviderError(ProviderErrorKind::malformed_response, std::string("street view image: ") + e.what());
    }
    if (img.width() != request.size || img.height() != request.size) {
        throw ProviderError(ProviderErrorKind::malformed_response,
                            "street view returned " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                                ", requested " + std::to_string(request.size));
    }
    return img;
}

SyntheticImagerySource::SyntheticImagerySource(std::uint64_t seed, std::set<std::string> uncovered_locations)
    : seed_(seed), uncovered_(std::move(uncovered_locations)) {}

void SyntheticImagerySource::check_coverage(const AcquisitionRequest& request) {
    if (uncovered_.count(request.location_id) != 0) {
        throw ProviderError(ProviderErrorKind::no_imagery, "no street-level imagery at " + request.location_id);
    }
}

Image SyntheticImagerySource::fetch(const AcquisitionRequest& request, double heading) {
    const std::uint64_t s =
        digest_u64(std::to_string(seed_) + "|" + request.location_id + "|" + fmt_double(heading));
    return synthetic_street(request.size, s);
}

std::string scene_id_for(const std::string& location_id, double heading) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "-h%03d", static_cast<int>(std::lround(heading)) % 360);
    return location_id + buf;
}

std::vector<StreetScene> fetch_views(const AcquisitionRequest& request, ImagerySource& source,
                                     const RetryPolicy& policy, Sleeper& sleeper) {
    request.validate();
    call_with_retry(policy, sleeper, nullptr, [&] {
        source.check_coverage(request);
        return 0;
    });
    std::vector<StreetScene> scenes;
    for (double heading : request.headings) {
        StreetScene s;
        s.scene_id = scene_id_for(request.location_id, heading);
        s.location_id = request.location_id;
        s.latitude = request.latitude;
        s.longitude = request.longitude;
        s.heading = heading;
        s.pitch = request.pitch;
        s.fov = request.fov;
        s.source = SceneSource::street_view_api;
        s.image = call_with_retry(policy, sleeper, nullptr, [&] { return source.fetch(request, heading); });
        if (s.image.width() != request.size || s.image.height() != request.size) {
            throw ProviderError(ProviderErrorKind::malformed_response, "imagery size does not match the request");
        }
        scenes.push_back(std::move(s));
    }
    return scenes;
}

json scene_metadata(const StreetScene& scene) {
    return {{"scene_id", scene.scene_id},
            {"location_id", scene.location_id},
            {"latitude", scene.latitude},
            {"longitude", scene.longitude},
            {"heading", scene.heading},
            {"pitch", scene.pitch},
            {"fov", scene.fov},
            {"source", scene.source == SceneSource::street_view_api ? "street_view_api" : "local_file"},
            {"width", scene.image.width()},
            {"height", scene.image.height()},
            {"image_hash", scene.image.empty() ? std::string() : content_hash(scene.image)}};
}

bool QCItem::has_candidate(const std::string& scene_id) const {
    return std::any_of(candidates.begin(), candidates.end(),
                       [&](const json& c) { return c.value("scene_id", "") == scene_id; });
}

json to_json(const QCItem& item) {
    return {{"item_id", item.item_id},
            {"location_id", item.location_id},
            {"version", item.version},
            {"candidates", item.candidates},
            {"chosen", item.chosen ? json(*item.chosen) : json(nullptr)},
            {"reviewer", item.reviewer},
            {"decided_at", item.decided_at}};
}

QcStore::QcStore(fs::path root, std::shared_ptr<Clock> clock) : root_(std::move(root)), clock_(std::move(clock)) {}

std::vector<json> QcStore::history() const {
    std::lock_guard<std::mutex> guard(mutex_);
    std::vector<json> out;
    const fs::path log = root_ / "qc.jsonl";
    if (!fs::exists(log)) return out;
    std::istringstream in(read_file_text(log));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw IntegrityError("qc.jsonl", std::string("malformed QC log entry: ") + e.what());
        }
    }
    return out;
}

std::vector<QCItem> QcStore::replay_locked() const {
    std::vector<QCItem> items;
    std::map<std::string, std::size_t> index;
    const fs::path log = root_ / "qc.jsonl";
    if (!fs::exists(log)) return items;
    std::istringstream in(read_file_text(log));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json r = json::parse(line);
        const std::string type = r.at("type").get<std::string>();
        if (type == "enqueue") {
            QCItem item;
            item.item_id = r.at("item_id").get<std::string>();
            item.location_id = r.at("location_id").get<std::string>();
            item.version = r.at("version").get<int>();
            item.candidates = r.at("candidates").get<std::vector<json>>();
            index[item.item_id] = items.size();
            items.push_back(std::move(item));
        } else if (type == "choice") {
            auto& item = items.at(index.at(r.at("item_id").get<std::string>()));
            item.chosen = r.at("scene_id").get<std::string>();
            item.reviewer = r.value("reviewer", "");
            item.decided_at = r.value("decided_at", "");
        }
    }
    return items;
}

void QcStore::append_locked(const json& record) {
    fs::create_directories(root_);
    const fs::path log = root_ / "qc.jsonl";
    std::string text = fs::exists(log) ? read_file_text(log) : std::string();
    text += record.dump();
    text.push_back('\n');
    write_file_atomic(log, text);
}

QCItem QcStore::enqueue(const std::vector<StreetScene>& scenes) {
    if (scenes.empty()) throw PreconditionError("validation", "enqueue requires at least one scene");
    const std::string location = scenes.front().location_id;
    for (const auto& s : scenes) {
        if (s.location_id != location) throw PreconditionError("validation", "scenes from different locations in one QC item");
        if (s.image.empty()) throw PreconditionError("validation", "scene " + s.scene_id + " has no image");
    }
    if (location.empty()) throw PreconditionError("validation", "scenes carry no location id");
    if (auto v = validate_batch(scenes); !v) throw PreconditionError("validation", v.message);

    std::lock_guard<std::mutex> guard(mutex_);
    int version = 1;
    for (const auto& item : replay_locked()) {
        if (item.location_id == location) version = std::max(version, item.version + 1);
    }
    QCItem item;
    item.location_id = location;
    item.version = version;
    item.item_id = location + "-v" + std::to_string(version);
    for (const auto& s : scenes) {
        json meta = scene_metadata(s);
        const std::string rel = image_file(s.scene_id, meta.at("image_hash").get<std::string>());
        const fs::path p = root_ / rel;
        if (!fs::exists(p)) write_png(p, s.image);
        meta["image"] = rel;
        item.candidates.push_back(std::move(meta));
    }
    append_locked({{"type", "enqueue"},
                   {"item_id", item.item_id},
                   {"location_id", item.location_id},
                   {"version", item.version},
                   {"candidates", item.candidates},
                   {"timestamp", clock_->now()}});
    return item;
}

QCItem QcStore::record_choice(const std::string& item_id, const std::string& scene_id, const std::string& reviewer) {
    std::lock_guard<std::mutex> guard(mutex_);
    auto items = replay_locked();
    auto it = std::find_if(items.begin(), items.end(), [&](const QCItem& i) { return i.item_id == item_id; });
    if (it == items.end()) throw NotFoundError("unknown QC item: " + item_id);
    if (it->decided()) throw PreconditionError("already_decided", "QC item " + item_id + " is already decided");
    if (!it->has_candidate(scene_id)) {
        throw PreconditionError("unknown_scene", "scene " + scene_id + " is not a candidate of " + item_id);
    }
    it->chosen = scene_id;
    it->reviewer = reviewer;
    it->decided_at = clock_->now();
    append_locked({{"type", "choice"},
                   {"item_id", item_id},
                   {"scene_id", scene_id},
                   {"reviewer", reviewer},
                   {"decided_at", it->decided_at}});
    return *it;
}

std::vector<QCItem> QcStore::items() const {
    std::lock_guard<std::mutex> guard(mutex_);
    return replay_locked();
}

QCItem QcStore::item(const std::string& item_id) const {
    for (auto& i : items()) {
        if (i.item_id == item_id) return i;
    }
    throw NotFoundError("unknown QC item: " + item_id);
}

Image QcStore::scene_image(const std::string& item_id, const std::string& scene_id) const {
    const QCItem i = item(item_id);
    for (const auto& c : i.candidates) {
        if (c.value("scene_id", "") == scene_id) return read_image(root_ / c.at("image").get<std::string>());
    }
    throw NotFoundError("scene " + scene_id + " is not part of " + item_id);
}

std::vector<ManifestEntry> parse_manifest(std::string_view csv) {
    const auto rows = parse_csv(csv);
    if (rows.empty() || rows.front().size() < 3 || rows.front()[0] != "location_id" || rows.front()[1] != "lat" ||
        rows.front()[2] != "lon") {
        throw PreconditionError("validation", "manifest header must be location_id,lat,lon,context_tag");
    }
    std::vector<ManifestEntry> out;
    std::set<std::string> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string where = "manifest row " + std::to_string(i + 1);
        if (r.size() < 3) throw PreconditionError("validation", where + ": expected at least 3 columns");
        ManifestEntry e;
        e.location_id = r[0];
        try {
            e.latitude = std::stod(r[1]);
            e.longitude = std::stod(r[2]);
        } catch (const std::exception&) {
            throw PreconditionError("validation", where + ": bad coordinates");
        }
        if (e.latitude < -90.0 || e.latitude > 90.0 || e.longitude < -180.0 || e.longitude > 180.0) {
            throw PreconditionError("validation", where + ": coordinates out of range");
        }
        if (r.size() > 3) e.context_tag = r[3];
        if (e.location_id.empty()) throw PreconditionError("validation", where + ": empty location_id");
        if (!seen.insert(e.location_id).second) throw PreconditionError("validation", where + ": duplicate location_id");
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) { return parse_manifest(read_file_text(path)); }

json IngestSummary::to_json() const {
    return {{"enqueued", enqueued}, {"no_imagery", no_imagery}, {"failed", failed}};
}

IngestSummary ingest_locations(const std::vector<ManifestEntry>& entries, const IngestOptions& options,
                               ImagerySource& source, QcStore& store, const RetryPolicy& policy, Sleeper& sleeper) {
    IngestSummary summary;
    for (const auto& entry : entries) {
        AcquisitionRequest req;
        req.location_id = entry.location_id;
        req.latitude = entry.latitude;
        req.longitude = entry.longitude;
        req.headings = options.headings;
        req.pitch = options.pitch;
        req.fov = options.fov;
        req.size = options.size;
        try {
            const auto scenes = fetch_views(req, source, policy, sleeper);
            summary.enqueued.push_back(store.enqueue(scenes).item_id);
        } catch (const ProviderError& e) {
            if (e.kind() == ProviderErrorKind::no_imagery) {
                summary.no_imagery.push_back(entry.location_id);
            } else {
                summary.failed.push_back(entry.location_id + ": " + e.what());
            }
        }
    }
    return summary;
}

}  // namespace bikeflow

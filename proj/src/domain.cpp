#include "bikeflow/domain.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "bikeflow/errors.hpp"

namespace bikeflow {

namespace {

constexpr std::array<std::pair<BoundaryKind, std::string_view>, 6> kKindNames{{
    {BoundaryKind::direct_moving_lane, "direct_moving_lane"},
    {BoundaryKind::direct_parked_cars, "direct_parked_cars"},
    {BoundaryKind::direct_edge, "direct_edge"},
    {BoundaryKind::painted_buffer, "painted_buffer"},
    {BoundaryKind::bollard_buffer, "bollard_buffer"},
    {BoundaryKind::armadillo_buffer, "armadillo_buffer"},
}};

double required_width(BoundaryKind kind) {
    switch (kind) {
        case BoundaryKind::painted_buffer:
            return 3.0;
        case BoundaryKind::bollard_buffer:
        case BoundaryKind::armadillo_buffer:
            return 1.5;
        default:
            return 0.0;
    }
}

std::string feet(double width) {
    char buf[32];
    if (std::floor(width) == width) {
        std::snprintf(buf, sizeof buf, "%d", static_cast<int>(width));
    } else {
        std::snprintf(buf, sizeof buf, "%.1f", width);
    }
    return buf;
}

DesignScenario make_scenario(int id, BoundaryKind left, BoundaryKind right) {
    DesignScenario s;
    s.scenario_id = id;
    s.left = BoundarySpec::of(left);
    s.right = BoundarySpec::of(right);
    s.reference_image_id = "ds" + std::to_string(id) + "-reference";
    s.prompt_fragment = render_boundary_clause(s.left, Side::left) + "\n" + render_boundary_clause(s.right, Side::right);
    return s;
}

}  // namespace

double normalize_heading(double degrees) {
    double h = std::fmod(degrees, 360.0);
    if (h < 0) h += 360.0;
    return h;
}

SceneValidation validate_scene(const StreetScene& scene) {
    if (scene.image.empty()) {
        return {false, "image", "scene " + scene.scene_id + " has no pixels"};
    }
    if (scene.source == SceneSource::street_view_api &&
        (scene.image.width() != kStreetViewSize || scene.image.height() != kStreetViewSize)) {
        return {false, "resolution",
                "street-view scene must be 1024x1024, got " + std::to_string(scene.image.width()) + "x" +
                    std::to_string(scene.image.height())};
    }
    if (!(scene.heading >= 0.0 && scene.heading < 360.0)) {
        return {false, "heading-range", "heading must lie in [0,360)"};
    }
    if (!(scene.latitude >= -90.0 && scene.latitude <= 90.0) ||
        !(scene.longitude >= -180.0 && scene.longitude <= 180.0)) {
        return {false, "coordinates", "latitude/longitude out of range"};
    }
    if (!(scene.fov > 0.0 && scene.fov <= 120.0)) {
        return {false, "fov", "field of view must lie in (0,120]"};
    }
    return {};
}

SceneValidation validate_batch(const std::vector<StreetScene>& scenes) {
    for (const auto& s : scenes) {
        if (auto v = validate_scene(s); !v) return v;
    }
    for (std::size_t i = 1; i < scenes.size(); ++i) {
        if (scenes[i].pitch != scenes[0].pitch || scenes[i].fov != scenes[0].fov) {
            return {false, "batch-homogeneity", "pitch and fov must be fixed across an acquisition batch"};
        }
        if (scenes[i].image.width() != scenes[0].image.width() ||
            scenes[i].image.height() != scenes[0].image.height()) {
            return {false, "batch-homogeneity", "image size must be fixed across an acquisition batch"};
        }
    }
    return {};
}

BoundarySpec BoundarySpec::of(BoundaryKind kind) { return {kind, required_width(kind)}; }

bool is_valid(const BoundarySpec& spec) { return spec.buffer_width_ft == required_width(spec.kind); }

std::string_view to_string(BoundaryKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

BoundaryKind boundary_kind_from_string(std::string_view text) {
    for (const auto& [k, name] : kKindNames) {
        if (name == text) return k;
    }
    throw PreconditionError("validation", "unknown boundary kind '" + std::string(text) + "'");
}

std::string_view to_string(Side side) { return side == Side::left ? "left" : "right"; }

std::string boundary_phrase(const BoundarySpec& spec) {
    switch (spec.kind) {
        case BoundaryKind::direct_moving_lane:
            return "No buffer; direct adjacency to moving lane";
        case BoundaryKind::direct_parked_cars:
            return "No buffer; direct adjacency to parked cars";
        case BoundaryKind::direct_edge:
            return "No buffer; direct edge (no separator)";
        case BoundaryKind::painted_buffer:
            return feet(spec.buffer_width_ft) + " ft white-painted buffer";
        case BoundaryKind::bollard_buffer:
            return feet(spec.buffer_width_ft) + " ft buffer with bollards";
        case BoundaryKind::armadillo_buffer:
            return feet(spec.buffer_width_ft) + " ft buffer with armadillo lane dividers";
    }
    return {};
}

std::string render_boundary_clause(const BoundarySpec& spec, Side side) {
    std::string phrase = boundary_phrase(spec);
    if (!phrase.empty()) {
        phrase[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(phrase[0])));
    }
    return std::string(side == Side::left ? "Left" : "Right") + " boundary: " + phrase;
}

const std::vector<DesignScenario>& scenario_catalog() {
    using K = BoundaryKind;
    static const std::vector<DesignScenario> catalog{
        make_scenario(1, K::direct_moving_lane, K::direct_parked_cars),
        make_scenario(2, K::direct_moving_lane, K::painted_buffer),
        make_scenario(3, K::direct_moving_lane, K::bollard_buffer),
        make_scenario(4, K::direct_moving_lane, K::armadillo_buffer),
        make_scenario(5, K::direct_moving_lane, K::direct_edge),
        make_scenario(6, K::painted_buffer, K::direct_edge),
        make_scenario(7, K::bollard_buffer, K::direct_edge),
        make_scenario(8, K::armadillo_buffer, K::direct_edge),
    };
    return catalog;
}

const DesignScenario& scenario_by_id(int scenario_id) {
    if (scenario_id < 1 || scenario_id > kScenarioCount) {
        throw PreconditionError("validation", "unknown scenario " + std::to_string(scenario_id) +
                                                  " (catalog has scenarios 1-8)");
    }
    return scenario_catalog()[static_cast<std::size_t>(scenario_id - 1)];
}

nlohmann::json to_json(const BoundarySpec& spec) {
    return {{"kind", to_string(spec.kind)}, {"buffer_width_ft", spec.buffer_width_ft}};
}

nlohmann::json to_json(const DesignScenario& s) {
    return {{"scenario_id", s.scenario_id},
            {"left", to_json(s.left)},
            {"right", to_json(s.right)},
            {"reference_image_id", s.reference_image_id},
            {"prompt_fragment", s.prompt_fragment}};
}

nlohmann::json catalog_to_json(const std::vector<DesignScenario>& catalog) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : catalog) arr.push_back(to_json(s));
    return {{"version", 1}, {"scenarios", arr}};
}

BoundarySpec boundary_from_json(const nlohmann::json& j) {
    BoundarySpec spec{boundary_kind_from_string(j.at("kind").get<std::string>()),
                      j.at("buffer_width_ft").get<double>()};
    if (!is_valid(spec)) {
        throw PreconditionError("validation", "buffer width does not match boundary kind " +
                                                  std::string(to_string(spec.kind)));
    }
    return spec;
}

DesignScenario scenario_from_json(const nlohmann::json& j) {
    DesignScenario s;
    s.scenario_id = j.at("scenario_id").get<int>();
    s.left = boundary_from_json(j.at("left"));
    s.right = boundary_from_json(j.at("right"));
    s.reference_image_id = j.at("reference_image_id").get<std::string>();
    s.prompt_fragment = j.at("prompt_fragment").get<std::string>();
    return s;
}

std::vector<DesignScenario> catalog_from_json(const nlohmann::json& j) {
    std::vector<DesignScenario> out;
    for (const auto& item : j.at("scenarios")) out.push_back(scenario_from_json(item));
    return out;
}

nlohmann::json to_json(const LaneDescription& lane) {
    return {{"present", lane.present},
            {"raw_text", lane.raw_text},
            {"markings", lane.markings},
            {"pattern", lane.pattern},
            {"width_estimate", lane.width_estimate},
            {"relative_position", lane.relative_position},
            {"parse_warning", lane.parse_warning}};
}

LaneDescription lane_from_json(const nlohmann::json& j) {
    LaneDescription lane;
    lane.present = j.at("present").get<bool>();
    lane.raw_text = j.at("raw_text").get<std::string>();
    lane.markings = j.value("markings", "");
    lane.pattern = j.value("pattern", "");
    lane.width_estimate = j.value("width_estimate", "");
    lane.relative_position = j.value("relative_position", "");
    lane.parse_warning = j.value("parse_warning", false);
    return lane;
}

int count_words(std::string_view text) {
    int n = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

OptimizedPrompt OptimizedPrompt::make(std::string text, int scenario_id, std::string user_prompt,
                                      std::string exemplar_set_id) {
    OptimizedPrompt p;
    p.word_count = count_words(text);
    p.length_warning = p.word_count > kPromptWordBudget;
    p.text = std::move(text);
    p.scenario_id = scenario_id;
    p.user_prompt = std::move(user_prompt);
    p.exemplar_set_id = std::move(exemplar_set_id);
    return p;
}

std::string_view to_string(CandidateStage stage) {
    return stage == CandidateStage::highlight ? "highlight" : "final";
}

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::yes:
            return "yes";
        case Verdict::no:
            return "no";
        default:
            return "pending";
    }
}

bool satisfies_invariants(const CandidateDesign& c) {
    if (c.verdict != Verdict::pending && !c.similarity) return false;
    if (c.stage == CandidateStage::highlight && (c.similarity || c.verdict != Verdict::pending)) return false;
    if (c.similarity && (*c.similarity < -1.0 - 1e-9 || *c.similarity > 1.0 + 1e-9)) return false;
    return true;
}

}  // namespace bikeflow

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bikeflow/raster.hpp"

namespace bikeflow {

enum class SceneSource { street_view_api, local_file };

struct StreetScene {
    std::string scene_id;
    std::string location_id;  // empty for ad-hoc local files
    double latitude = 0.0;
    double longitude = 0.0;
    double heading = 0.0;
    double pitch = 0.0;
    double fov = 90.0;
    SceneSource source = SceneSource::local_file;
    Image image;
};

inline constexpr int kStreetViewSize = 1024;

struct SceneValidation {
    bool accepted = true;
    std::string rule;  // first violated rule, empty when accepted
    std::string message;

    explicit operator bool() const noexcept { return accepted; }
};

[[nodiscard]] SceneValidation validate_scene(const StreetScene& scene);
/// Pitch and field of view must match across one acquisition batch.
[[nodiscard]] SceneValidation validate_batch(const std::vector<StreetScene>& scenes);
[[nodiscard]] double normalize_heading(double degrees);

enum class BoundaryKind {
    direct_moving_lane,
    direct_parked_cars,
    direct_edge,
    painted_buffer,
    bollard_buffer,
    armadillo_buffer,
};

enum class Side { left, right };

struct BoundarySpec {
    BoundaryKind kind = BoundaryKind::direct_edge;
    double buffer_width_ft = 0.0;

    [[nodiscard]] static BoundarySpec of(BoundaryKind kind);
    [[nodiscard]] bool has_buffer() const noexcept { return buffer_width_ft > 0.0; }

    friend bool operator==(const BoundarySpec&, const BoundarySpec&) = default;
};

[[nodiscard]] bool is_valid(const BoundarySpec& spec);
[[nodiscard]] std::string_view to_string(BoundaryKind kind);
[[nodiscard]] BoundaryKind boundary_kind_from_string(std::string_view text);
[[nodiscard]] std::string_view to_string(Side side);

/// Table wording for one boundary, e.g. "3 ft white-painted buffer".
[[nodiscard]] std::string boundary_phrase(const BoundarySpec& spec);
/// "Right boundary: 3 ft white-painted buffer". Byte-stable for equal inputs.
[[nodiscard]] std::string render_boundary_clause(const BoundarySpec& spec, Side side);

struct DesignScenario {
    int scenario_id = 0;
    BoundarySpec left;
    BoundarySpec right;
    std::string reference_image_id;
    std::string prompt_fragment;

    friend bool operator==(const DesignScenario&, const DesignScenario&) = default;
};

inline constexpr int kScenarioCount = 8;

/// The eight catalogued boundary configurations, ids 1..8 ascending.
[[nodiscard]] const std::vector<DesignScenario>& scenario_catalog();
/// Throws PreconditionError("unknown_scenario") outside 1..8.
[[nodiscard]] const DesignScenario& scenario_by_id(int scenario_id);

[[nodiscard]] nlohmann::json to_json(const BoundarySpec& spec);
[[nodiscard]] nlohmann::json to_json(const DesignScenario& scenario);
[[nodiscard]] nlohmann::json catalog_to_json(const std::vector<DesignScenario>& catalog);
[[nodiscard]] BoundarySpec boundary_from_json(const nlohmann::json& j);
[[nodiscard]] DesignScenario scenario_from_json(const nlohmann::json& j);
[[nodiscard]] std::vector<DesignScenario> catalog_from_json(const nlohmann::json& j);

struct LaneDescription {
    bool present = false;
    std::string raw_text;
    std::string markings;
    std::string pattern;
    std::string width_estimate;
    std::string relative_position;
    bool parse_warning = false;

    friend bool operator==(const LaneDescription&, const LaneDescription&) = default;
};

[[nodiscard]] nlohmann::json to_json(const LaneDescription& lane);
[[nodiscard]] LaneDescription lane_from_json(const nlohmann::json& j);

inline constexpr int kPromptWordBudget = 130;

struct OptimizedPrompt {
    std::string text;
    int word_count = 0;
    int scenario_id = 0;
    std::string user_prompt;
    std::string exemplar_set_id;
    bool length_warning = false;

    /// Derives word_count and length_warning from `text`.
    [[nodiscard]] static OptimizedPrompt make(std::string text, int scenario_id, std::string user_prompt,
                                              std::string exemplar_set_id);
};

[[nodiscard]] int count_words(std::string_view text);

enum class CandidateStage { highlight, final };
enum class Verdict { pending, yes, no };

[[nodiscard]] std::string_view to_string(CandidateStage stage);
[[nodiscard]] std::string_view to_string(Verdict verdict);

struct CandidateDesign {
    std::string candidate_id;
    std::string run_id;
    CandidateStage stage = CandidateStage::final;
    Image image;
    std::optional<Mask> mask;
    std::optional<double> similarity;
    Verdict verdict = Verdict::pending;
    // Provenance: the highlight this candidate was generated from and the
    // hash of the prompt used. Empty for highlight-stage candidates.
    std::string parent_id;
    std::string prompt_hash;
};

/// verdict != pending requires a similarity; highlight candidates carry neither.
[[nodiscard]] bool satisfies_invariants(const CandidateDesign& candidate);

}  // namespace bikeflow

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace bikeflow {

struct GoldLabel {
    std::string case_id;
    int scenario_id = 0;
    std::string correct_candidate_id;
};

/// CSV with header `case_id,scenario_id,correct_candidate_id`.
[[nodiscard]] std::vector<GoldLabel> parse_gold_labels(std::string_view csv);
[[nodiscard]] std::vector<GoldLabel> read_gold_labels(const std::filesystem::path& path);

/// matches/cases as a percentage with one decimal, rounded half up using
/// integer arithmetic ("95.5").
[[nodiscard]] std::string format_percent(long long matches, long long cases);

struct AccuracyRow {
    int scenario_id = 0;  // 0 for the overall row
    long long cases = 0;
    long long matches = 0;

    [[nodiscard]] double accuracy() const { return cases == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(cases); }
    [[nodiscard]] std::string percent() const { return format_percent(matches, cases); }
};

struct AccuracyTable {
    std::vector<AccuracyRow> rows;  // scenarios with at least one case, ascending
    AccuracyRow overall;
    std::vector<std::string> warnings;

    /// Scenario ids across the top, accuracies beneath, plus an overall column.
    [[nodiscard]] std::string to_text() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Per-scenario share of cases whose pick equals the gold label. A missing
/// pick is an Error("missing_pick") naming every affected case.
[[nodiscard]] AccuracyTable evaluator_accuracy(const std::vector<GoldLabel>& labels,
                                               const std::map<std::string, std::string>& picks);

struct FidelityScore {
    int lane_plausibility = 1;
    int scene_integration = 1;
    int background_preservation = 1;
    bool background_change_flag = false;
    std::array<double, 3> weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
};

/// Weighted sum of the three sub-scores. Weights must be non-negative and
/// sum to 1 within 1e-9; sub-scores must lie in 1..5.
[[nodiscard]] double composite_fidelity(const FidelityScore& score);

struct ComplianceRecord {
    std::map<std::string, bool> hard;  // constraint id -> satisfied
    std::map<std::string, bool> soft;
    int global_adherence = 5;

    [[nodiscard]] double compliance_rate() const;
    [[nodiscard]] double soft_rate() const;
    [[nodiscard]] bool all_hard_satisfied() const;
};

inline constexpr double kFidelityThreshold = 4.0;
inline constexpr double kDefaultSoftMinimum = 1.0;

/// composite >= 4 (inclusive), no background-change flag, every hard
/// constraint satisfied and soft rate >= soft_minimum.
[[nodiscard]] bool accept_case(const FidelityScore& fidelity, const ComplianceRecord& compliance,
                               double soft_minimum = kDefaultSoftMinimum);

/// Accepted / total. Empty input is a PreconditionError.
[[nodiscard]] double accuracy(std::span<const bool> accepted);

}  // namespace bikeflow

#include "bikeflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "bikeflow/csv.hpp"
#include "bikeflow/digest.hpp"
#include "bikeflow/domain.hpp"
#include "bikeflow/errors.hpp"

namespace bikeflow {

namespace {

// Tolerance for the inclusive threshold; composites are weighted means of
// integers, so anything this close to 4 is 4.
constexpr double kThresholdEpsilon = 1e-9;

}  // namespace

std::vector<GoldLabel> parse_gold_labels(std::string_view csv) {
    const auto rows = parse_csv(csv);
    if (rows.empty()) throw PreconditionError("validation", "gold label file is empty");
    if (rows.front() != std::vector<std::string>{"case_id", "scenario_id", "correct_candidate_id"}) {
        throw PreconditionError("validation", "gold label header must be case_id,scenario_id,correct_candidate_id");
    }
    std::vector<GoldLabel> labels;
    std::set<std::string> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& cells = rows[i];
        const std::string where = "gold labels row " + std::to_string(i + 1);
        if (cells.size() != 3) throw PreconditionError("validation", where + ": expected 3 columns");
        GoldLabel label{cells[0], 0, cells[2]};
        try {
            label.scenario_id = std::stoi(cells[1]);
        } catch (const std::exception&) {
            throw PreconditionError("validation", where + ": bad scenario id");
        }
        if (label.scenario_id < 1 || label.scenario_id > kScenarioCount) {
            throw PreconditionError("validation", where + ": scenario outside 1-8");
        }
        if (!seen.insert(label.case_id).second) {
            throw PreconditionError("validation", "duplicate gold label for case " + label.case_id);
        }
        labels.push_back(std::move(label));
    }
    return labels;
}

std::vector<GoldLabel> read_gold_labels(const std::filesystem::path& path) { return parse_gold_labels(read_file_text(path)); }

std::string format_percent(long long matches, long long cases) {
    if (cases <= 0) return "n/a";
    // tenths of a percent, half up: floor((1000*m/n) + 1/2)
    const long long tenths = (2000 * matches + cases) / (2 * cases);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%lld", tenths / 10, tenths % 10);
    return buf;
}

std::string AccuracyTable::to_text() const {
    std::ostringstream out;
    out << "Design Scenario |";
    for (const auto& r : rows) out << ' ' << r.scenario_id << " |";
    out << " Overall\n";
    out << "Eval Acc. (%)   |";
    for (const auto& r : rows) out << ' ' << r.percent() << " |";
    out << ' ' << overall.percent() << "\n";
    for (const auto& w : warnings) out << "warning: " << w << "\n";
    return out.str();
}

nlohmann::json AccuracyTable::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        arr.push_back({{"scenario_id", r.scenario_id}, {"cases", r.cases}, {"matches", r.matches}, {"accuracy_percent", r.percent()}});
    }
    return {{"scenarios", arr},
            {"overall", {{"cases", overall.cases}, {"matches", overall.matches}, {"accuracy_percent", overall.percent()}}},
            {"warnings", warnings}};
}

AccuracyTable evaluator_accuracy(const std::vector<GoldLabel>& labels, const std::map<std::string, std::string>& picks) {
    std::vector<std::string> missing;
    for (const auto& l : labels) {
        if (picks.find(l.case_id) == picks.end()) missing.push_back(l.case_id);
    }
    if (!missing.empty()) {
        std::string msg = "no pick for case(s):";
        for (const auto& id : missing) msg += " " + id;
        throw Error("missing_pick", msg);
    }
    std::map<int, AccuracyRow> by_scenario;
    for (int s = 1; s <= 8; ++s) by_scenario[s].scenario_id = s;
    AccuracyTable table;
    for (const auto& l : labels) {
        auto& row = by_scenario[l.scenario_id];
        row.scenario_id = l.scenario_id;
        ++row.cases;
        ++table.overall.cases;
        if (picks.at(l.case_id) == l.correct_candidate_id) {
            ++row.matches;
            ++table.overall.matches;
        }
    }
    for (const auto& [id, row] : by_scenario) {
        if (row.cases == 0) {
            table.warnings.push_back("scenario " + std::to_string(id) + " has no cases; row omitted");
        } else {
            table.rows.push_back(row);
        }
    }
    return table;
}

double composite_fidelity(const FidelityScore& score) {
    const std::array<int, 3> s{score.lane_plausibility, score.scene_integration, score.background_preservation};
    for (int v : s) {
        if (v < 1 || v > 5) throw PreconditionError("validation", "fidelity sub-scores must lie in 1..5");
    }
    double sum = 0.0;
    for (double w : score.weights) {
        if (!(w >= 0.0)) throw PreconditionError("validation", "fidelity weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw PreconditionError("validation", "fidelity weights must sum to 1");
    double composite = 0.0;
    for (std::size_t i = 0; i < 3; ++i) composite += score.weights[i] * s[i];
    return composite;
}

double ComplianceRecord::compliance_rate() const {
    const auto total = hard.size() + soft.size();
    if (total == 0) return 1.0;
    const auto ok = std::count_if(hard.begin(), hard.end(), [](const auto& kv) { return kv.second; }) +
                    std::count_if(soft.begin(), soft.end(), [](const auto& kv) { return kv.second; });
    return static_cast<double>(ok) / static_cast<double>(total);
}

double ComplianceRecord::soft_rate() const {
    if (soft.empty()) return 1.0;
    const auto ok = std::count_if(soft.begin(), soft.end(), [](const auto& kv) { return kv.second; });
    return static_cast<double>(ok) / static_cast<double>(soft.size());
}

bool ComplianceRecord::all_hard_satisfied() const {
    return std::all_of(hard.begin(), hard.end(), [](const auto& kv) { return kv.second; });
}

bool accept_case(const FidelityScore& fidelity, const ComplianceRecord& compliance, double soft_minimum) {
    return composite_fidelity(fidelity) >= kFidelityThreshold - kThresholdEpsilon && !fidelity.background_change_flag &&
           compliance.all_hard_satisfied() && compliance.soft_rate() >= soft_minimum - kThresholdEpsilon;
}

double accuracy(std::span<const bool> accepted) {
    if (accepted.empty()) throw PreconditionError("accuracy: no cases");
    const auto n = std::count(accepted.begin(), accepted.end(), true);
    return static_cast<double>(n) / static_cast<double>(accepted.size());
}

}  // namespace bikeflow

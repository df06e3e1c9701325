#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bikeflow/domain.hpp"
#include "bikeflow/providers.hpp"
#include "bikeflow/templates.hpp"

namespace bikeflow {

inline constexpr Rgb kDefaultMaskFill{128, 128, 128};
inline constexpr int kAdvanceCount = 3;
inline constexpr int kDefaultMaxRounds = 3;

/// Keeps pixels under the mask, paints everything else `fill`.
[[nodiscard]] Image apply_mask(const Image& image, const Mask& mask, Rgb fill = kDefaultMaskFill);

/// dot(a,b) / (|a||b|), clamped to [-1,1]. Throws Error("degenerate_embedding")
/// for a zero vector and PreconditionError on dimension mismatch.
[[nodiscard]] double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

struct RankedEntry {
    std::string candidate_id;
    std::optional<double> similarity;  // absent when segmentation or embedding failed
    bool empty_mask = false;
    std::string mask_hash;
    std::string error;
};

struct RankedPool {
    std::vector<RankedEntry> entries;
    std::string reference_image_id;
    bool masked = true;
};

/// Canonical order: scored entries by similarity descending, ties by id
/// ascending, then unscored entries by id.
void sort_entries(std::vector<RankedEntry>& entries);

/// Ids of the first min(k, scored entries) entries. Unscored candidates
/// never advance.
[[nodiscard]] std::vector<std::string> top_k(const RankedPool& pool, int k = kAdvanceCount);

enum class VerdictParsing { strict, lenient };

struct ParsedVerdict {
    std::optional<Verdict> verdict;  // absent when unparseable
    bool flagged = false;            // raw text needed normalization
};

[[nodiscard]] ParsedVerdict parse_verdict(std::string_view raw, VerdictParsing mode);

struct ComplianceResult {
    Verdict verdict = Verdict::no;
    bool parse_flag = false;
    std::vector<std::string> raw_responses;
};

enum class Disposition { selected, regenerate, exhausted };

[[nodiscard]] std::string_view to_string(Disposition d);
[[nodiscard]] Disposition disposition_from_string(std::string_view text);

struct SelectionOutcome {
    std::optional<std::string> selected;
    std::map<std::string, Verdict> verdicts;
    Disposition disposition = Disposition::regenerate;
};

/// Highest-similarity advanced candidate judged yes. With no yes verdict the
/// outcome is `regenerate` while round < max_rounds, otherwise `exhausted`.
[[nodiscard]] SelectionOutcome select_final(const RankedPool& pool, const std::map<std::string, Verdict>& verdicts,
                                            int round = 1, int max_rounds = kDefaultMaxRounds, int k = kAdvanceCount);

/// Checklist lines for one boundary, in the evaluator prompt's bullet style.
[[nodiscard]] std::string compliance_checklist(const BoundarySpec& spec, Side side);

struct EvaluatorConfig {
    Rgb mask_fill = kDefaultMaskFill;
    int advance_count = kAdvanceCount;
    VerdictParsing parsing = VerdictParsing::lenient;
    int max_rounds = kDefaultMaxRounds;
    bool parallel = true;
};

struct MaskedReference {
    std::string reference_image_id;
    Image masked;
    std::string mask_hash;
};

struct EvaluationReport {
    int round = 1;
    RankedPool pool;
    std::vector<std::string> advanced;
    std::map<std::string, ComplianceResult> compliance;
    SelectionOutcome outcome;
    std::string reference_mask_hash;
};

[[nodiscard]] nlohmann::json to_json(const EvaluationReport& report);
[[nodiscard]] EvaluationReport evaluation_report_from_json(const nlohmann::json& j);

class Evaluator {
  public:
    Evaluator(ProviderSet providers, TemplateLibrary templates, EvaluatorConfig config = {});

    /// Reference goes through the same segment, mask and fill path as candidates.
    [[nodiscard]] MaskedReference mask_reference(const Image& reference, const std::string& reference_image_id) const;

    /// Segments, masks and embeds every candidate (writing `mask` and
    /// `similarity` back) and scores it against the masked reference.
    [[nodiscard]] RankedPool rank_pool(std::vector<CandidateDesign>& candidates, const MaskedReference& reference) const;

    [[nodiscard]] std::string compliance_prompt(const DesignScenario& scenario) const;

    /// Judges one advanced candidate. Unparseable responses are retried once
    /// and then count as "no" with the parse flag set.
    [[nodiscard]] ComplianceResult check_compliance(const CandidateDesign& candidate, const DesignScenario& scenario,
                                                    const RankedPool& pool) const;

    /// rank_pool, top-k advancement, compliance on the advanced set only,
    /// then select_final.
    [[nodiscard]] EvaluationReport evaluate(std::vector<CandidateDesign>& candidates, const MaskedReference& reference,
                                            const DesignScenario& scenario, int round) const;

    [[nodiscard]] const EvaluatorConfig& config() const noexcept { return config_; }

  private:
    ProviderSet providers_;
    TemplateLibrary templates_;
    EvaluatorConfig config_;
};

}  // namespace bikeflow

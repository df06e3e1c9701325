#include "bikeflow/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>

namespace bikeflow {

using nlohmann::json;

Image apply_mask(const Image& image, const Mask& mask, Rgb fill) {
    if (mask.width() != image.width() || mask.height() != image.height()) {
        throw PreconditionError("apply_mask: mask is " + std::to_string(mask.width()) + "x" +
                                std::to_string(mask.height()) + ", image is " + std::to_string(image.width()) + "x" +
                                std::to_string(image.height()));
    }
    Image out = image;
    auto px = out.bytes();
    const auto cells = mask.cells();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == 0) {
            px[3 * i] = fill.r;
            px[3 * i + 1] = fill.g;
            px[3 * i + 2] = fill.b;
        }
    }
    return out;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw PreconditionError("cosine_similarity: dimension mismatch " + std::to_string(a.dimension()) + " vs " +
                                std::to_string(b.dimension()));
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.dimension(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) throw Error("degenerate_embedding", "cosine similarity of a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void sort_entries(std::vector<RankedEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& x, const RankedEntry& y) {
        if (x.similarity.has_value() != y.similarity.has_value()) return x.similarity.has_value();
        if (x.similarity && *x.similarity != *y.similarity) return *x.similarity > *y.similarity;
        return x.candidate_id < y.candidate_id;
    });
}

std::vector<std::string> top_k(const RankedPool& pool, int k) {
    if (k < 1) throw PreconditionError("top_k: k must be >= 1");
    std::vector<std::string> out;
    for (const auto& e : pool.entries) {
        if (static_cast<int>(out.size()) == k || !e.similarity) break;
        out.push_back(e.candidate_id);
    }
    return out;
}

ParsedVerdict parse_verdict(std::string_view raw, VerdictParsing mode) {
    if (raw == "yes") return {Verdict::yes, false};
    if (raw == "no") return {Verdict::no, false};
    if (mode == VerdictParsing::strict) return {std::nullopt, true};

    while (!raw.empty() && std::isspace(static_cast<unsigned char>(raw.front()))) raw.remove_prefix(1);
    while (!raw.empty() && std::isspace(static_cast<unsigned char>(raw.back()))) raw.remove_suffix(1);
    std::string token(raw);
    std::transform(token.begin(), token.end(), token.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (!token.empty() && std::ispunct(static_cast<unsigned char>(token.back()))) token.pop_back();
    if (token == "yes") return {Verdict::yes, true};
    if (token == "no") return {Verdict::no, true};
    return {std::nullopt, true};
}

std::string_view to_string(Disposition d) {
    switch (d) {
        case Disposition::selected:
            return "selected";
        case Disposition::regenerate:
            return "regenerate";
        case Disposition::exhausted:
            return "exhausted";
    }
    return "unknown";
}

Disposition disposition_from_string(std::string_view text) {
    if (text == "selected") return Disposition::selected;
    if (text == "regenerate") return Disposition::regenerate;
    if (text == "exhausted") return Disposition::exhausted;
    throw PreconditionError("validation", "unknown disposition '" + std::string(text) + "'");
}

SelectionOutcome select_final(const RankedPool& pool, const std::map<std::string, Verdict>& verdicts, int round,
                              int max_rounds, int k) {
    const auto advanced = top_k(pool, k);
    if (verdicts.size() != advanced.size() ||
        !std::all_of(advanced.begin(), advanced.end(), [&](const std::string& id) { return verdicts.count(id) == 1; })) {
        throw PreconditionError("select_final: verdicts must cover exactly the advanced candidates");
    }
    SelectionOutcome out;
    out.verdicts = verdicts;
    for (const auto& id : advanced) {
        if (verdicts.at(id) == Verdict::yes) {
            out.selected = id;
            out.disposition = Disposition::selected;
            return out;
        }
    }
    out.disposition = round < max_rounds ? Disposition::regenerate : Disposition::exhausted;
    return out;
}

std::string compliance_checklist(const BoundarySpec& spec, Side side) {
    const std::string buffer_lines =
        "-- Narrow buffer zone adjacent to the bike lane.\n"
        "-- Buffer zone bounded by solid white lines on both sides.\n"
        "-- Prominent diagonal white stripes filling the buffer zone.";
    switch (spec.kind) {
        case BoundaryKind::direct_moving_lane:
            return "-- Prominent continuous solid white line separating the bike lane from the adjacent motor-vehicle lane.";
        case BoundaryKind::direct_parked_cars:
            return "-- Prominent continuous solid white line separating the bike lane from the parked cars.";
        case BoundaryKind::direct_edge:
            return std::string("-- Prominent continuous solid white line marking the ") +
                   (side == Side::left ? "left" : "right") + "-hand edge of the bike lane.";
        case BoundaryKind::painted_buffer:
            return buffer_lines;
        case BoundaryKind::bollard_buffer:
            return buffer_lines +
                   "\n-- Vertical red-and-white striped bollards placed at regular intervals within the buffer zone.";
        case BoundaryKind::armadillo_buffer:
            return buffer_lines +
                   "\n-- Rounded, semi-flexible rubber lane dividers (“armadillos”) placed centrally and evenly spaced "
                   "within the buffer zone. Dividers should be dome-shaped, black with white reflective stripes.";
    }
    return {};
}

Evaluator::Evaluator(ProviderSet providers, TemplateLibrary templates, EvaluatorConfig config)
    : providers_(std::move(providers)), templates_(std::move(templates)), config_(config) {
    providers_.require_complete();
    if (config_.advance_count < 1) throw PreconditionError("advance_count must be >= 1");
    if (config_.max_rounds < 1) throw PreconditionError("max_rounds must be >= 1");
}

MaskedReference Evaluator::mask_reference(const Image& reference, const std::string& reference_image_id) const {
    const Mask mask = providers_.segmenter->segment(reference);
    return {reference_image_id, apply_mask(reference, mask, config_.mask_fill), content_hash(mask)};
}

RankedPool Evaluator::rank_pool(std::vector<CandidateDesign>& candidates, const MaskedReference& reference) const {
    for (const auto& c : candidates) {
        if (c.stage != CandidateStage::final) throw PreconditionError("rank_pool: only final-stage candidates are ranked");
        if (c.run_id != candidates.front().run_id) throw PreconditionError("rank_pool: candidates span several runs");
    }
    const EmbeddingVector ref = providers_.embedder->embed(reference.masked);

    auto score = [&](CandidateDesign& c) {
        RankedEntry e;
        e.candidate_id = c.candidate_id;
        try {
            Mask mask = providers_.segmenter->segment(c.image);
            e.mask_hash = content_hash(mask);
            e.empty_mask = mask.is_empty();
            const Image masked = apply_mask(c.image, mask, config_.mask_fill);
            c.mask = std::move(mask);
            e.similarity = cosine_similarity(providers_.embedder->embed(masked), ref);
            c.similarity = e.similarity;
        } catch (const Error& err) {
            e.similarity.reset();
            e.error = err.code() + ": " + err.what();
        }
        return e;
    };

    RankedPool pool;
    pool.reference_image_id = reference.reference_image_id;
    pool.masked = true;
    if (config_.parallel) {
        std::vector<std::future<RankedEntry>> futures;
        for (auto& c : candidates) futures.push_back(std::async(std::launch::async, score, std::ref(c)));
        for (auto& f : futures) pool.entries.push_back(f.get());
    } else {
        for (auto& c : candidates) pool.entries.push_back(score(c));
    }
    sort_entries(pool.entries);
    return pool;
}

std::string Evaluator::compliance_prompt(const DesignScenario& scenario) const {
    return templates_.compliance
        .render({{"LEFT_CHECKLIST", compliance_checklist(scenario.left, Side::left)},
                 {"RIGHT_CHECKLIST", compliance_checklist(scenario.right, Side::right)}})
        .combined();
}

ComplianceResult Evaluator::check_compliance(const CandidateDesign& candidate, const DesignScenario& scenario,
                                             const RankedPool& pool) const {
    const auto advanced = top_k(pool, config_.advance_count);
    if (std::find(advanced.begin(), advanced.end(), candidate.candidate_id) == advanced.end()) {
        throw PreconditionError("check_compliance: " + candidate.candidate_id + " did not advance");
    }
    const std::string prompt = compliance_prompt(scenario);
    ComplianceResult result;
    for (int attempt = 0; attempt < 2; ++attempt) {
        result.raw_responses.push_back(providers_.judge->judge(candidate.image, prompt));
        const auto parsed = parse_verdict(result.raw_responses.back(), config_.parsing);
        result.parse_flag = result.parse_flag || parsed.flagged;
        if (parsed.verdict) {
            result.verdict = *parsed.verdict;
            return result;
        }
    }
    result.verdict = Verdict::no;
    result.parse_flag = true;
    return result;
}

EvaluationReport Evaluator::evaluate(std::vector<CandidateDesign>& candidates, const MaskedReference& reference,
                                     const DesignScenario& scenario, int round) const {
    EvaluationReport report;
    report.round = round;
    report.reference_mask_hash = reference.mask_hash;
    report.pool = rank_pool(candidates, reference);
    report.advanced = top_k(report.pool, config_.advance_count);

    std::vector<const CandidateDesign*> judged;
    for (const auto& id : report.advanced) {
        auto it = std::find_if(candidates.begin(), candidates.end(), [&](const auto& c) { return c.candidate_id == id; });
        judged.push_back(&*it);
    }
    std::vector<ComplianceResult> results(judged.size());
    if (config_.parallel) {
        std::vector<std::future<ComplianceResult>> futures;
        for (const auto* c : judged) {
            futures.push_back(std::async(std::launch::async, [&, c] { return check_compliance(*c, scenario, report.pool); }));
        }
        for (std::size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
    } else {
        for (std::size_t i = 0; i < judged.size(); ++i) results[i] = check_compliance(*judged[i], scenario, report.pool);
    }

    std::map<std::string, Verdict> verdicts;
    for (std::size_t i = 0; i < judged.size(); ++i) {
        verdicts[judged[i]->candidate_id] = results[i].verdict;
        report.compliance[judged[i]->candidate_id] = results[i];
    }
    for (auto& c : candidates) {
        if (auto it = verdicts.find(c.candidate_id); it != verdicts.end()) c.verdict = it->second;
    }
    report.outcome = select_final(report.pool, verdicts, round, config_.max_rounds, config_.advance_count);
    return report;
}

json to_json(const EvaluationReport& r) {
    json entries = json::array();
    for (const auto& e : r.pool.entries) {
        entries.push_back({{"candidate_id", e.candidate_id},
                           {"similarity", e.similarity ? json(*e.similarity) : json(nullptr)},
                           {"empty_mask", e.empty_mask},
                           {"mask_hash", e.mask_hash},
                           {"error", e.error}});
    }
    json verdicts = json::object();
    for (const auto& [id, c] : r.compliance) {
        verdicts[id] = {{"verdict", to_string(c.verdict)}, {"parse_flag", c.parse_flag}, {"raw", c.raw_responses}};
    }
    return {{"round", r.round},
            {"reference_image_id", r.pool.reference_image_id},
            {"reference_mask_hash", r.reference_mask_hash},
            {"masked", r.pool.masked},
            {"entries", entries},
            {"advanced", r.advanced},
            {"verdicts", verdicts},
            {"disposition", to_string(r.outcome.disposition)},
            {"selected", r.outcome.selected ? json(*r.outcome.selected) : json(nullptr)}};
}

EvaluationReport evaluation_report_from_json(const json& j) {
    EvaluationReport r;
    r.round = j.at("round").get<int>();
    r.pool.reference_image_id = j.at("reference_image_id").get<std::string>();
    r.reference_mask_hash = j.value("reference_mask_hash", "");
    r.pool.masked = j.at("masked").get<bool>();
    for (const auto& e : j.at("entries")) {
        RankedEntry entry;
        entry.candidate_id = e.at("candidate_id").get<std::string>();
        if (!e.at("similarity").is_null()) entry.similarity = e.at("similarity").get<double>();
        entry.empty_mask = e.value("empty_mask", false);
        entry.mask_hash = e.value("mask_hash", "");
        entry.error = e.value("error", "");
        r.pool.entries.push_back(std::move(entry));
    }
    r.advanced = j.at("advanced").get<std::vector<std::string>>();
    for (const auto& [id, v] : j.at("verdicts").items()) {
        ComplianceResult c;
        c.verdict = v.at("verdict").get<std::string>() == "yes" ? Verdict::yes : Verdict::no;
        c.parse_flag = v.value("parse_flag", false);
        c.raw_responses = v.value("raw", std::vector<std::string>{});
        r.outcome.verdicts[id] = c.verdict;
        r.compliance[id] = std::move(c);
    }
    r.outcome.disposition = disposition_from_string(j.at("disposition").get<std::string>());
    if (!j.at("selected").is_null()) r.outcome.selected = j.at("selected").get<std::string>();
    return r;
}

}  // namespace bikeflow

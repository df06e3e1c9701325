#include "bikeflow/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <future>

#include "bikeflow/digest.hpp"

namespace bikeflow {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

bool any_of_terms(const std::string& lowered, std::initializer_list<std::string_view> terms) {
    return std::any_of(terms.begin(), terms.end(), [&](std::string_view t) { return lowered.find(t) != std::string::npos; });
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n') {
            if (auto t = trim(current); !t.empty()) out.push_back(t);
            current.clear();
            continue;
        }
        current.push_back(c);
        const bool end = (c == '.' || c == '!' || c == '?') &&
                         (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])));
        if (end) {
            if (auto t = trim(current); !t.empty()) out.push_back(t);
            current.clear();
        }
    }
    if (auto t = trim(current); !t.empty()) out.push_back(t);
    return out;
}

void append(std::string& field, const std::string& sentence) {
    if (!field.empty()) field.push_back(' ');
    field += sentence;
}

// "Markings: ..." style lines. Returns true if any label was found.
bool parse_labeled(const std::string& text, LaneDescription& lane) {
    bool found = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = trim(std::string_view(text).substr(pos, nl - pos));
        pos = nl + 1;
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string label = lower(trim(std::string_view(line).substr(0, colon)));
        label.erase(std::remove_if(label.begin(), label.end(), [](char c) { return c == '*' || c == '#' || c == '-'; }),
                    label.end());
        label = trim(label);
        const std::string value = trim(std::string_view(line).substr(colon + 1));
        if (value.empty()) continue;
        std::string* target = nullptr;
        if (label == "markings" || label == "marking") target = &lane.markings;
        else if (label == "pattern" || label == "design pattern") target = &lane.pattern;
        else if (label == "width" || label == "width estimate" || label == "estimated width") target = &lane.width_estimate;
        else if (label == "position" || label == "relative position" || label == "location") target = &lane.relative_position;
        if (target != nullptr) {
            append(*target, value);
            found = true;
        }
    }
    return found;
}

}  // namespace

LaneDescription parse_locator_response(const std::string& text, const std::vector<std::string>& absence_phrases) {
    LaneDescription lane;
    lane.raw_text = trim(text);
    const std::string lowered = lower(lane.raw_text);
    const bool absent = lane.raw_text.empty() ||
                        std::any_of(absence_phrases.begin(), absence_phrases.end(),
                                    [&](const std::string& p) { return lowered.find(lower(p)) != std::string::npos; });
    if (absent) {
        lane.present = false;
        return lane;
    }
    lane.present = true;
    if (parse_labeled(lane.raw_text, lane)) return lane;

    for (const auto& sentence : split_sentences(lane.raw_text)) {
        const std::string s = lower(sentence);
        if (any_of_terms(s, {"left boundary", "right boundary", "right side", "left side", "adjacent", "between",
                             "along", "next to"})) {
            append(lane.relative_position, sentence);
        }
        if (any_of_terms(s, {"feet", "foot", " ft", "meter", "metre", "wide", "width"})) {
            append(lane.width_estimate, sentence);
        }
        if (any_of_terms(s, {"line", "marking", "symbol", "stripe", "stencil"})) {
            append(lane.markings, sentence);
        }
        if (any_of_terms(s, {"buffer", "bollard", "armadillo", "green", "diagonal", "hatch", "surface", "separator",
                             "curb", "barrier"})) {
            append(lane.pattern, sentence);
        }
    }
    lane.parse_warning = lane.markings.empty() && lane.pattern.empty() && lane.width_estimate.empty() &&
                         lane.relative_position.empty();
    return lane;
}

std::string compose_generation_prompt(const OptimizedPrompt& optimized, const LaneDescription& lane) {
    if (!lane.present) {
        throw PreconditionError("compose_generation_prompt: scene has no bike lane and is excluded");
    }
    return optimized.text + "\n\nExisting bike lane: " + lane.raw_text + "\n\n" + std::string(kHighlightStatement);
}

DesignAgents::DesignAgents(ProviderSet providers, TemplateLibrary templates, AgentConfig config)
    : providers_(std::move(providers)), templates_(std::move(templates)), config_(std::move(config)) {
    providers_.require_complete();
    if (config_.pool_size < kMinPoolSize || config_.pool_size > kMaxPoolSize) {
        throw PreconditionError("pool_size must lie in [5,10]");
    }
}

LaneDescription DesignAgents::locate_lane(const StreetScene& scene) const {
    if (auto v = validate_scene(scene); !v) {
        throw PreconditionError("validation", "scene rejected (" + v.rule + "): " + v.message);
    }
    const auto prompt = templates_.locator.render({});
    const std::string text = providers_.locator->describe(scene.image, prompt.system, prompt.user);
    return parse_locator_response(text, config_.absence_phrases);
}

OptimizedPrompt DesignAgents::optimize_prompt(const std::string& user_prompt, const DesignScenario& scenario,
                                              const ExemplarSet& exemplars) const {
    if (trim(user_prompt).empty()) throw PreconditionError("optimize_prompt: user prompt must be non-empty");
    const auto prompt = templates_.optimizer.render({{"EXAMPLES", exemplars.format()},
                                                     {"BOUNDARY_CLAUSES", scenario.prompt_fragment},
                                                     {"USER_PROMPT", user_prompt}});
    std::string text = trim(providers_.optimizer->describe(Image{}, prompt.system, prompt.user));
    // Models sometimes wrap the answer in quotes despite the instruction.
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"') text = trim(text.substr(1, text.size() - 2));
    if (text.empty()) throw Error("empty_optimization", "prompt optimizer returned an empty response");
    return OptimizedPrompt::make(std::move(text), scenario.scenario_id, user_prompt, exemplars.exemplar_set_id);
}

std::string DesignAgents::highlight_prompt(const LaneDescription& lane, const std::string& color) const {
    return templates_.highlight.render({{"COLOR", color}, {"LANE_DESCRIPTION", lane.raw_text}}).combined();
}

CandidateDesign DesignAgents::generate_highlight(const StreetScene& scene, const LaneDescription& lane,
                                                 const std::string& color, const std::string& run_id,
                                                 const std::string& highlight_id) const {
    if (!lane.present) throw PreconditionError("generate_highlight: scene is excluded (no bike lane)");
    if (trim(color).empty()) throw PreconditionError("generate_highlight: color must be non-empty");
    const std::string prompt = highlight_prompt(lane, color);
    auto images = providers_.editor->edit_image(scene.image, prompt, 1, EditOptions{0});
    CandidateDesign c;
    c.candidate_id = highlight_id;
    c.run_id = run_id;
    c.stage = CandidateStage::highlight;
    c.image = std::move(images.at(0));
    c.prompt_hash = sha256_hex(prompt);
    return c;
}

std::vector<CandidateDesign> DesignAgents::generate_candidates(const CandidateDesign& highlight,
                                                               const std::string& final_prompt, int pool_size,
                                                               const std::string& id_prefix,
                                                               const Image* source) const {
    if (pool_size < kMinPoolSize || pool_size > kMaxPoolSize) {
        throw PreconditionError("generate_candidates: pool_size " + std::to_string(pool_size) +
                                " outside [5,10]");
    }
    if (highlight.stage != CandidateStage::highlight) {
        throw PreconditionError("generate_candidates: expected a highlight-stage ancestor");
    }
    const Image& input = source != nullptr ? *source : highlight.image;
    const std::string prompt_hash = sha256_hex(final_prompt);

    auto one_slot = [&](int slot) {
        auto images = providers_.editor->edit_image(input, final_prompt, 1, EditOptions{slot});
        CandidateDesign c;
        char id[16];
        std::snprintf(id, sizeof id, "c%02d", slot + 1);
        c.candidate_id = id_prefix + id;
        c.run_id = highlight.run_id;
        c.stage = CandidateStage::final;
        c.image = std::move(images.at(0));
        c.parent_id = highlight.candidate_id;
        c.prompt_hash = prompt_hash;
        return c;
    };

    std::vector<CandidateDesign> done;
    std::vector<std::string> failures;
    if (config_.parallel_generation) {
        std::vector<std::future<CandidateDesign>> futures;
        for (int slot = 0; slot < pool_size; ++slot) futures.push_back(std::async(std::launch::async, one_slot, slot));
        for (int slot = 0; slot < pool_size; ++slot) {
            try {
                done.push_back(futures[static_cast<std::size_t>(slot)].get());
            } catch (const Error& e) {
                failures.push_back("slot " + std::to_string(slot + 1) + ": " + e.what());
            }
        }
    } else {
        for (int slot = 0; slot < pool_size; ++slot) {
            try {
                done.push_back(one_slot(slot));
            } catch (const Error& e) {
                failures.push_back("slot " + std::to_string(slot + 1) + ": " + e.what());
            }
        }
    }
    if (!failures.empty()) {
        std::string msg = std::to_string(failures.size()) + " of " + std::to_string(pool_size) + " slots failed";
        for (const auto& f : failures) msg += "; " + f;
        throw PartialPoolError(msg, std::move(done));
    }
    return done;
}

}  // namespace bikeflow

#include "bikeflow/orchestrator.hpp"

#include <algorithm>
#include <sstream>

#include "bikeflow/digest.hpp"
#include "bikeflow/lane_sketch.hpp"

namespace bikeflow {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view text, const std::pair<E, std::string_view> (&table)[N], const char* what) {
    for (const auto& [value, name] : table) {
        if (name == text) return value;
    }
    throw PreconditionError("validation", std::string("unknown ") + what + ": " + std::string(text));
}

template <typename E, std::size_t N>
std::string_view enum_name(E value, const std::pair<E, std::string_view> (&table)[N]) {
    for (const auto& [v, name] : table) {
        if (v == value) return name;
    }
    return "unknown";
}

constexpr std::pair<RunState, std::string_view> kStateNames[] = {
    {RunState::created, "Created"},
    {RunState::located, "Located"},
    {RunState::description_approved, "DescriptionApproved"},
    {RunState::prompt_optimized, "PromptOptimized"},
    {RunState::prompt_approved, "PromptApproved"},
    {RunState::highlighted, "Highlighted"},
    {RunState::highlight_approved, "HighlightApproved"},
    {RunState::pool_generated, "PoolGenerated"},
    {RunState::evaluated, "Evaluated"},
    {RunState::awaiting_expert_pick, "AwaitingExpertPick"},
    {RunState::finalized, "Finalized"},
    {RunState::excluded, "Excluded"},
    {RunState::errored, "Errored"},
};

constexpr std::pair<EventKind, std::string_view> kEventNames[] = {
    {EventKind::created, "created"},
    {EventKind::located, "located"},
    {EventKind::lane_absent, "lane_absent"},
    {EventKind::approve_description, "approve_description"},
    {EventKind::edit_description, "edit_description"},
    {EventKind::reject_description, "reject_description"},
    {EventKind::prompt_optimized, "prompt_optimized"},
    {EventKind::approve_prompt, "approve_prompt"},
    {EventKind::edit_prompt, "edit_prompt"},
    {EventKind::reject_prompt, "reject_prompt"},
    {EventKind::highlighted, "highlighted"},
    {EventKind::approve_highlight, "approve_highlight"},
    {EventKind::edit_highlight, "edit_highlight"},
    {EventKind::reject_highlight, "reject_highlight"},
    {EventKind::pool_generated, "pool_generated"},
    {EventKind::evaluated, "evaluated"},
    {EventKind::regenerate, "regenerate"},
    {EventKind::present_for_pick, "present_for_pick"},
    {EventKind::expert_agrees, "expert_agrees"},
    {EventKind::disagreement_recorded, "disagreement_recorded"},
    {EventKind::expert_disagrees, "expert_disagrees"},
    {EventKind::fail, "fail"},
    {EventKind::resume, "resume"},
};

constexpr std::pair<CheckpointStage, std::string_view> kStageNames[] = {
    {CheckpointStage::description, "description"},
    {CheckpointStage::prompt, "prompt"},
    {CheckpointStage::highlight, "highlight"},
    {CheckpointStage::selection, "selection"},
};

constexpr std::pair<Decision, std::string_view> kDecisionNames[] = {
    {Decision::approved, "approved"},
    {Decision::edited, "edited"},
    {Decision::rejected, "rejected"},
};

constexpr std::pair<ReviseTarget, std::string_view> kTargetNames[] = {
    {ReviseTarget::description, "description"},
    {ReviseTarget::prompt, "prompt"},
    {ReviseTarget::highlight, "highlight"},
};

constexpr std::string_view kScene = "scene.png";
constexpr std::string_view kLocator = "locator.json";
constexpr std::string_view kPrompt = "prompt.txt";
constexpr std::string_view kHighlight = "highlight.png";
constexpr std::string_view kEval = "eval.json";
constexpr std::string_view kLog = "run.log";

// Pipeline depth of an artifact: scene 0, description 1, prompt 2,
// highlight 3, pool and evaluation 4.
int artifact_rank(std::string_view name) {
    if (name == kScene) return 0;
    if (name == kLocator) return 1;
    if (name == kPrompt) return 2;
    if (name == kHighlight) return 3;
    return 4;
}

// Deepest artifact rank still current in a state.
int retained_rank(RunState s) {
    switch (s) {
        case RunState::created: return 0;
        case RunState::located:
        case RunState::description_approved:
        case RunState::excluded: return 1;
        case RunState::prompt_optimized:
        case RunState::prompt_approved: return 2;
        case RunState::highlighted:
        case RunState::highlight_approved: return 3;
        default: return 4;
    }
}

std::string bytes_hash(std::string_view bytes) { return sha256_hex(bytes); }

std::string to_bytes(const std::vector<std::uint8_t>& v) { return std::string(v.begin(), v.end()); }

std::span<const std::uint8_t> as_span(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

bool valid_run_id(const std::string& id) {
    if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) != 0 || c == '-' || c == '_' || c == '.';
    });
}

json checkpoint_to_json(const CheckpointRecord& c) {
    return {{"stage", to_string(c.stage)},      {"decision", to_string(c.decision)},
            {"editor", c.editor},               {"payload_before", c.payload_before},
            {"payload_after", c.payload_after}, {"timestamp", c.timestamp},
            {"round", c.round}};
}

CheckpointRecord checkpoint_from_json(const json& j) {
    CheckpointRecord c;
    c.stage = checkpoint_stage_from_string(j.at("stage").get<std::string>());
    c.decision = decision_from_string(j.at("decision").get<std::string>());
    c.editor = j.value("editor", "");
    c.payload_before = j.value("payload_before", "");
    c.payload_after = j.value("payload_after", "");
    c.timestamp = j.value("timestamp", "");
    c.round = j.value("round", 1);
    return c;
}

std::string stage_artifact(CheckpointStage stage) {
    switch (stage) {
        case CheckpointStage::description: return std::string(kLocator);
        case CheckpointStage::prompt: return std::string(kPrompt);
        case CheckpointStage::highlight: return std::string(kHighlight);
        case CheckpointStage::selection: break;
    }
    throw PreconditionError("validation", "selection has no artifact; use the expert pick");
}

EventKind checkpoint_event(CheckpointStage stage, Decision decision) {
    static constexpr EventKind table[3][3] = {
        {EventKind::approve_description, EventKind::edit_description, EventKind::reject_description},
        {EventKind::approve_prompt, EventKind::edit_prompt, EventKind::reject_prompt},
        {EventKind::approve_highlight, EventKind::edit_highlight, EventKind::reject_highlight},
    };
    if (stage == CheckpointStage::selection) {
        throw PreconditionError("validation", "selection is decided through the expert pick");
    }
    return table[static_cast<int>(stage)][static_cast<int>(decision)];
}

std::string round_prefix(int round) { return "r" + std::to_string(round) + "-"; }

}  // namespace

std::string_view to_string(RunState s) { return enum_name(s, kStateNames); }
std::string_view to_string(EventKind e) { return enum_name(e, kEventNames); }
std::string_view to_string(CheckpointStage s) { return enum_name(s, kStageNames); }
std::string_view to_string(Decision d) { return enum_name(d, kDecisionNames); }
std::string_view to_string(ReviseTarget t) { return enum_name(t, kTargetNames); }
RunState run_state_from_string(std::string_view t) { return parse_enum(t, kStateNames, "run state"); }
EventKind event_kind_from_string(std::string_view t) { return parse_enum(t, kEventNames, "event"); }
CheckpointStage checkpoint_stage_from_string(std::string_view t) { return parse_enum(t, kStageNames, "checkpoint stage"); }
Decision decision_from_string(std::string_view t) { return parse_enum(t, kDecisionNames, "decision"); }
ReviseTarget revise_target_from_string(std::string_view t) { return parse_enum(t, kTargetNames, "revise target"); }

bool is_checkpoint_state(RunState s) { return checkpoint_of(s).has_value(); }

bool is_terminal_state(RunState s) { return s == RunState::finalized || s == RunState::excluded; }

bool is_executable_state(RunState s) {
    switch (s) {
        case RunState::created:
        case RunState::description_approved:
        case RunState::prompt_approved:
        case RunState::highlight_approved:
        case RunState::pool_generated:
        case RunState::evaluated: return true;
        default: return false;
    }
}

std::optional<CheckpointStage> checkpoint_of(RunState s) {
    switch (s) {
        case RunState::located: return CheckpointStage::description;
        case RunState::prompt_optimized: return CheckpointStage::prompt;
        case RunState::highlighted: return CheckpointStage::highlight;
        case RunState::awaiting_expert_pick: return CheckpointStage::selection;
        default: return std::nullopt;
    }
}

RunState revise_state(ReviseTarget target) {
    switch (target) {
        case ReviseTarget::description: return RunState::located;
        case ReviseTarget::prompt: return RunState::prompt_optimized;
        case ReviseTarget::highlight: return RunState::highlighted;
    }
    return RunState::located;
}

IllegalTransition::IllegalTransition(RunState state, EventKind event, const std::string& detail)
    : Error("illegal_transition", "event '" + std::string(to_string(event)) + "' is not allowed in state " +
                                      std::string(to_string(state)) + (detail.empty() ? "" : " (" + detail + ")")),
      state_(state),
      event_(event) {}

std::optional<RunState> transition(RunState state, EventKind event, std::optional<ReviseTarget> target, int round,
                                   int max_rounds, std::optional<RunState> failed_from) {
    using S = RunState;
    using E = EventKind;
    const bool budget_left = round < max_rounds;
    switch (state) {
        case S::created:
            if (event == E::located) return S::located;
            if (event == E::lane_absent) return S::excluded;
            if (event == E::fail) return S::errored;
            break;
        case S::located:
            if (event == E::approve_description || event == E::edit_description) return S::description_approved;
            if (event == E::reject_description) return S::created;
            break;
        case S::description_approved:
            if (event == E::prompt_optimized) return S::prompt_optimized;
            if (event == E::fail) return S::errored;
            break;
        case S::prompt_optimized:
            if (event == E::approve_prompt || event == E::edit_prompt) return S::prompt_approved;
            if (event == E::reject_prompt) return S::description_approved;
            break;
        case S::prompt_approved:
            if (event == E::highlighted) return S::highlighted;
            if (event == E::fail) return S::errored;
            break;
        case S::highlighted:
            if (event == E::approve_highlight || event == E::edit_highlight) return S::highlight_approved;
            if (event == E::reject_highlight) return S::prompt_approved;
            break;
        case S::highlight_approved:
            if (event == E::pool_generated) return S::pool_generated;
            if (event == E::fail) return S::errored;
            break;
        case S::pool_generated:
            if (event == E::evaluated) return S::evaluated;
            if (event == E::fail) return S::errored;
            break;
        case S::evaluated:
            if (event == E::present_for_pick) return S::awaiting_expert_pick;
            if (event == E::regenerate && budget_left) return S::highlight_approved;
            if (event == E::expert_disagrees && target && budget_left) return revise_state(*target);
            break;
        case S::awaiting_expert_pick:
            if (event == E::expert_agrees) return S::finalized;
            if (event == E::disagreement_recorded) return S::awaiting_expert_pick;
            if (event == E::expert_disagrees && target && budget_left) return revise_state(*target);
            break;
        case S::errored:
            if (event == E::resume && failed_from) return *failed_from;
            break;
        case S::finalized:
        case S::excluded: break;
    }
    return std::nullopt;
}

json to_json(const RunEvent& e) {
    json j{{"version", e.version},
           {"event", to_string(e.kind)},
           {"artifacts", e.artifacts},
           {"data", e.data},
           {"timestamp", e.timestamp}};
    if (e.target) j["target"] = to_string(*e.target);
    if (e.checkpoint) j["checkpoint"] = checkpoint_to_json(*e.checkpoint);
    return j;
}

RunEvent run_event_from_json(const json& j) {
    RunEvent e;
    e.version = j.at("version").get<int>();
    e.kind = event_kind_from_string(j.at("event").get<std::string>());
    e.artifacts = j.value("artifacts", std::map<std::string, std::string>{});
    e.data = j.value("data", json::object());
    e.timestamp = j.value("timestamp", "");
    if (j.contains("target")) e.target = revise_target_from_string(j.at("target").get<std::string>());
    if (j.contains("checkpoint")) e.checkpoint = checkpoint_from_json(j.at("checkpoint"));
    return e;
}

json to_json(const PipelineRun& run) {
    json checkpoints = json::array();
    for (const auto& c : run.checkpoints) checkpoints.push_back(checkpoint_to_json(c));
    json stale = json::array();
    for (const auto& s : run.stale) {
        stale.push_back({{"name", s.name}, {"hash", s.hash}, {"path", s.path}, {"version", s.version}});
    }
    const auto ckpt = checkpoint_of(run.state);
    return {{"run_id", run.run_id},
            {"scene_id", run.scene_id},
            {"scenario_id", run.scenario_id},
            {"state", to_string(run.state)},
            {"current_checkpoint", ckpt ? json(to_string(*ckpt)) : json(nullptr)},
            {"round", run.round},
            {"max_rounds", run.max_rounds},
            {"pool_size", run.pool_size},
            {"user_prompt", run.user_prompt},
            {"highlight_color", run.highlight_color},
            {"version", run.version},
            {"checkpoints", checkpoints},
            {"artifacts", run.artifacts},
            {"stale", stale},
            {"failed_from", run.failed_from ? json(to_string(*run.failed_from)) : json(nullptr)},
            {"failed_stage", run.failed_stage},
            {"last_error", run.last_error},
            {"advanced", run.advanced},
            {"agent_selection", run.agent_selection ? json(*run.agent_selection) : json(nullptr)},
            {"disposition", run.disposition},
            {"expert_pick", run.expert_pick ? json(*run.expert_pick) : json(nullptr)},
            {"awaiting_revise_target", run.awaiting_revise_target},
            {"provenance", run.provenance}};
}

std::vector<std::string> invalidated_artifacts(const PipelineRun& run, RunState next) {
    std::vector<std::string> out;
    if (next == RunState::errored || run.state == RunState::errored) return out;
    const int keep = retained_rank(next);
    for (const auto& [name, hash] : run.artifacts) {
        if (artifact_rank(name) > keep) out.push_back(name);
    }
    return out;
}

PipelineRun advance(const PipelineRun& run, RunEvent event) {
    PipelineRun out;
    if (event.kind == EventKind::created) {
        if (run.version != 0) throw IllegalTransition(run.state, event.kind, "run already exists");
        const auto& d = event.data;
        out.run_id = d.at("run_id").get<std::string>();
        out.scene_id = d.at("scene_id").get<std::string>();
        out.scenario_id = d.at("scenario_id").get<int>();
        out.max_rounds = d.value("max_rounds", kDefaultMaxRounds);
        out.pool_size = d.value("pool_size", 6);
        out.user_prompt = d.value("user_prompt", "");
        out.highlight_color = d.value("highlight_color", "green");
        out.provenance = d.value("provenance", json::object());
        out.state = RunState::created;
        out.version = 1;
        out.artifacts = event.artifacts;
        event.version = 1;
        out.events.push_back(std::move(event));
        return out;
    }

    const auto next =
        transition(run.state, event.kind, event.target, run.round, run.max_rounds, run.failed_from);
    if (!next) {
        std::string detail;
        if ((event.kind == EventKind::regenerate || event.kind == EventKind::expert_disagrees) &&
            run.round >= run.max_rounds) {
            detail = "round budget of " + std::to_string(run.max_rounds) + " spent";
        } else if (event.kind == EventKind::expert_disagrees && !event.target) {
            detail = "revise target required";
        }
        throw IllegalTransition(run.state, event.kind, detail);
    }

    out = run;
    out.version = run.version + 1;
    event.version = out.version;
    const std::string stale_dir = "stale/v" + std::to_string(out.version) + "/";
    auto retire = [&](const std::string& name) {
        auto it = out.artifacts.find(name);
        if (it == out.artifacts.end()) return;
        out.stale.push_back({name, it->second, stale_dir + name, out.version});
        out.artifacts.erase(it);
    };
    for (const auto& name : invalidated_artifacts(run, *next)) retire(name);
    for (const auto& [name, hash] : event.artifacts) retire(name);
    for (const auto& [name, hash] : event.artifacts) out.artifacts[name] = hash;

    const auto& d = event.data;
    switch (event.kind) {
        case EventKind::fail:
            out.failed_from = run.state;
            out.failed_stage = d.value("stage", "");
            out.last_error = d.value("message", "");
            break;
        case EventKind::resume:
            out.failed_from.reset();
            out.failed_stage.clear();
            out.last_error.clear();
            break;
        case EventKind::evaluated:
            out.advanced = d.value("advanced", std::vector<std::string>{});
            out.agent_selection = d.contains("selected") && d.at("selected").is_string()
                                      ? std::optional<std::string>(d.at("selected").get<std::string>())
                                      : std::nullopt;
            out.disposition = d.value("disposition", "");
            break;
        case EventKind::regenerate:
        case EventKind::expert_disagrees:
            out.round = run.round + 1;
            out.advanced.clear();
            out.agent_selection.reset();
            out.disposition.clear();
            out.expert_pick.reset();
            out.awaiting_revise_target = false;
            break;
        case EventKind::expert_agrees:
            out.expert_pick = d.at("candidate_id").get<std::string>();
            out.awaiting_revise_target = false;
            break;
        case EventKind::disagreement_recorded:
            out.expert_pick = d.contains("candidate_id") && d.at("candidate_id").is_string()
                                  ? std::optional<std::string>(d.at("candidate_id").get<std::string>())
                                  : std::nullopt;
            out.awaiting_revise_target = true;
            break;
        default: break;
    }
    out.state = *next;
    if (event.checkpoint) out.checkpoints.push_back(*event.checkpoint);
    out.events.push_back(std::move(event));
    return out;
}

PipelineRun replay(const std::vector<RunEvent>& events) {
    PipelineRun run;
    for (const auto& e : events) {
        const int expected = run.version + 1;
        if (e.version != expected) {
            throw IntegrityError(std::string(kLog), "event log version " + std::to_string(e.version) +
                                                        " where " + std::to_string(expected) + " was expected");
        }
        run = advance(run, e);
    }
    if (run.version == 0) throw IntegrityError(std::string(kLog), "event log is empty");
    return run;
}

RunStore::RunStore(fs::path root) : root_(std::move(root)) {}

fs::path RunStore::run_dir(const std::string& run_id) const {
    if (!valid_run_id(run_id)) throw PreconditionError("validation", "invalid run id: " + run_id);
    return root_ / run_id;
}

bool RunStore::exists(const std::string& run_id) const {
    return valid_run_id(run_id) && fs::exists(root_ / run_id / kLog);
}

std::vector<std::string> RunStore::list() const {
    std::vector<std::string> ids;
    if (!fs::exists(root_)) return ids;
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (entry.is_directory() && fs::exists(entry.path() / kLog)) ids.push_back(entry.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

void RunStore::persist(const PipelineRun& run) const {
    std::string text;
    for (const auto& e : run.events) {
        text += to_json(e).dump();
        text.push_back('\n');
    }
    write_file_atomic(run_dir(run.run_id) / kLog, text);
}

PipelineRun RunStore::load(const std::string& run_id) const {
    if (!exists(run_id)) throw NotFoundError("unknown run: " + run_id);
    const fs::path dir = run_dir(run_id);
    std::istringstream in(read_file_text(dir / kLog));
    std::vector<RunEvent> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            events.push_back(run_event_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw IntegrityError(std::string(kLog), "malformed event log entry: " + std::string(e.what()));
        }
    }
    PipelineRun run = replay(events);
    auto verify = [&](const std::string& name, const std::string& rel, const std::string& hash) {
        const fs::path p = dir / rel;
        if (!fs::exists(p)) throw IntegrityError(name, "artifact " + rel + " is missing");
        if (sha256_file(p) != hash) throw IntegrityError(name, "artifact " + rel + " does not match its recorded hash");
    };
    for (const auto& [name, hash] : run.artifacts) verify(name, name, hash);
    for (const auto& s : run.stale) verify(s.name, s.path, s.hash);
    return run;
}

std::string RunStore::read_artifact(const PipelineRun& run, const std::string& name) const {
    const auto it = run.artifacts.find(name);
    if (it == run.artifacts.end()) throw NotFoundError("run " + run.run_id + " has no current artifact " + name);
    return read_blob(run.run_id, name);
}

std::string RunStore::read_blob(const std::string& run_id, const std::string& relative_path) const {
    const fs::path rel(relative_path);
    if (rel.is_absolute() || relative_path.find("..") != std::string::npos) {
        throw PreconditionError("validation", "invalid artifact path: " + relative_path);
    }
    return read_file_text(run_dir(run_id) / rel);
}

std::string derive_run_id(const std::string& scene_hash, int scenario_id, std::uint64_t seed, int pool_size) {
    Sha256 h;
    h.update(scene_hash).update("|").update_u64(static_cast<std::uint64_t>(scenario_id)).update("|").update_u64(seed);
    h.update("|").update_u64(static_cast<std::uint64_t>(pool_size));
    return "run-" + h.hex().substr(0, 12);
}

std::string candidate_artifact(const std::string& candidate_id) { return "candidates/" + candidate_id + ".png"; }
std::string mask_artifact(const std::string& candidate_id) { return "masks/" + candidate_id + ".png"; }

Engine::Engine(EngineConfig config, ProviderSet providers, TemplateLibrary templates, std::shared_ptr<Clock> clock)
    : config_(std::move(config)),
      providers_(std::move(providers)),
      templates_(std::move(templates)),
      agents_(providers_, templates_, config_.agents),
      evaluator_(providers_, templates_, config_.evaluator),
      clock_(std::move(clock)),
      store_(config_.runs_dir) {
    if (config_.evaluator.max_rounds < 1) throw PreconditionError("validation", "max_rounds must be at least 1");
}

std::shared_ptr<std::mutex> Engine::lock_for(const std::string& run_id) {
    std::lock_guard<std::mutex> guard(locks_mutex_);
    auto& slot = locks_[run_id];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
}

PipelineRun Engine::commit(const PipelineRun& run, RunEvent event, const std::map<std::string, std::string>& files) {
    for (const auto& [name, bytes] : files) event.artifacts[name] = bytes_hash(bytes);
    event.timestamp = clock_->now();
    if (event.checkpoint) event.checkpoint->timestamp = event.timestamp;
    PipelineRun next = advance(run, std::move(event));

    const fs::path dir = store_.run_dir(next.run_id);
    for (std::size_t i = run.stale.size(); i < next.stale.size(); ++i) {
        const auto& s = next.stale[i];
        const fs::path to = dir / s.path;
        fs::create_directories(to.parent_path());
        fs::rename(dir / s.name, to);
    }
    for (const auto& [name, bytes] : files) write_file_atomic(dir / name, bytes);
    store_.persist(next);
    return next;
}

PipelineRun Engine::create_run(const CreateRunRequest& request) {
    const DesignScenario& scenario = scenario_by_id(request.scenario_id);
    if (request.pool_size < kMinPoolSize || request.pool_size > kMaxPoolSize) {
        throw PreconditionError("validation", "pool_size " + std::to_string(request.pool_size) + " outside [5,10]");
    }
    if (request.scene_image.empty()) throw PreconditionError("validation", "scene image is empty");
    const std::string scene_hash = content_hash(request.scene_image);

    std::string run_id;
    if (request.run_id) {
        run_id = *request.run_id;
        if (!valid_run_id(run_id)) throw PreconditionError("validation", "invalid run id: " + run_id);
        if (store_.exists(run_id)) throw Error("conflict", "run " + run_id + " already exists");
    } else {
        const std::string base = derive_run_id(scene_hash, request.scenario_id, request.seed, request.pool_size);
        run_id = base;
        for (int n = 2; store_.exists(run_id); ++n) run_id = base + "-" + std::to_string(n);
    }

    auto lock = lock_for(run_id);
    std::lock_guard<std::mutex> guard(*lock);

    json provenance{{"scene_hash", scene_hash},
                    {"seed", request.seed},
                    {"templates", templates_.hashes()},
                    {"exemplar_set_id", templates_.exemplars.exemplar_set_id},
                    {"reference_image_id", scenario.reference_image_id},
                    {"second_step_input",
                     config_.agents.second_step_input == SecondStepInput::highlight ? "highlight" : "scene"},
                    {"advance_count", config_.evaluator.advance_count},
                    {"location_id", request.location_id}};
    RunEvent e;
    e.kind = EventKind::created;
    e.data = {{"run_id", run_id},
              {"scene_id", request.scene_id.empty() ? "scene-" + scene_hash.substr(0, 12) : request.scene_id},
              {"scenario_id", request.scenario_id},
              {"max_rounds", config_.evaluator.max_rounds},
              {"pool_size", request.pool_size},
              {"user_prompt", request.user_prompt.value_or(config_.default_user_prompt)},
              {"highlight_color", request.highlight_color.value_or(config_.agents.highlight_color)},
              {"provenance", provenance}};
    fs::create_directories(store_.run_dir(run_id));
    return commit(PipelineRun{}, std::move(e), {{std::string(kScene), to_bytes(encode_png(request.scene_image))}});
}

Image Engine::reference_for(const DesignScenario& scenario) const {
    if (!config_.references_dir.empty()) {
        const fs::path p = config_.references_dir / ("ds" + std::to_string(scenario.scenario_id) + ".png");
        if (fs::exists(p)) return read_image(p);
    }
    return reference_design_image(scenario);
}

PipelineRun Engine::execute_locked(const PipelineRun& run) {
    const DesignScenario& scenario = scenario_by_id(run.scenario_id);
    auto image_of = [&](const std::string& name) {
        const std::string bytes = store_.read_artifact(run, name);
        return decode_image(as_span(bytes));
    };
    auto scene = [&] {
        StreetScene s;
        s.scene_id = run.scene_id;
        s.source = SceneSource::local_file;
        s.image = image_of(std::string(kScene));
        return s;
    };
    auto lane = [&] { return lane_from_json(json::parse(store_.read_artifact(run, std::string(kLocator)))); };

    std::string stage;
    try {
        RunEvent e;
        std::map<std::string, std::string> files;
        switch (run.state) {
            case RunState::created: {
                stage = "locate";
                const LaneDescription found = agents_.locate_lane(scene());
                files[std::string(kLocator)] = to_json(found).dump(2) + "\n";
                e.kind = found.present ? EventKind::located : EventKind::lane_absent;
                e.data = {{"present", found.present}, {"parse_warning", found.parse_warning}};
                break;
            }
            case RunState::description_approved: {
                stage = "optimize";
                const OptimizedPrompt opt = agents_.optimize_prompt(run.user_prompt, scenario);
                files[std::string(kPrompt)] = opt.text;
                e.kind = EventKind::prompt_optimized;
                e.data = {{"word_count", opt.word_count},
                          {"length_warning", opt.length_warning},
                          {"exemplar_set_id", opt.exemplar_set_id}};
                break;
            }
            case RunState::prompt_approved: {
                stage = "highlight";
                const CandidateDesign hl =
                    agents_.generate_highlight(scene(), lane(), run.highlight_color, run.run_id, "highlight");
                files[std::string(kHighlight)] = to_bytes(encode_png(hl.image));
                e.kind = EventKind::highlighted;
                e.data = {{"prompt_hash", hl.prompt_hash}, {"color", run.highlight_color}};
                break;
            }
            case RunState::highlight_approved: {
                stage = "generate";
                CandidateDesign hl;
                hl.candidate_id = "highlight";
                hl.run_id = run.run_id;
                hl.stage = CandidateStage::highlight;
                hl.image = image_of(std::string(kHighlight));
                const OptimizedPrompt opt =
                    OptimizedPrompt::make(store_.read_artifact(run, std::string(kPrompt)), run.scenario_id,
                                          run.user_prompt, templates_.exemplars.exemplar_set_id);
                const std::string final_prompt = compose_generation_prompt(opt, lane());
                std::optional<Image> source;
                if (config_.agents.second_step_input == SecondStepInput::scene) source = image_of(std::string(kScene));
                const auto pool = agents_.generate_candidates(hl, final_prompt, run.pool_size, round_prefix(run.round),
                                                              source ? &*source : nullptr);
                json ids = json::array();
                for (const auto& c : pool) {
                    files[candidate_artifact(c.candidate_id)] = to_bytes(encode_png(c.image));
                    ids.push_back(c.candidate_id);
                }
                e.kind = EventKind::pool_generated;
                e.data = {{"candidates", ids}, {"final_prompt_hash", sha256_hex(final_prompt)}, {"round", run.round}};
                break;
            }
            case RunState::pool_generated: {
                stage = "evaluate";
                const std::string prefix = "candidates/" + round_prefix(run.round);
                std::vector<CandidateDesign> pool;
                for (const auto& [name, hash] : run.artifacts) {
                    if (name.rfind(prefix, 0) != 0) continue;
                    CandidateDesign c;
                    c.candidate_id = name.substr(11, name.size() - 11 - 4);
                    c.run_id = run.run_id;
                    c.stage = CandidateStage::final;
                    c.parent_id = "highlight";
                    c.image = image_of(name);
                    pool.push_back(std::move(c));
                }
                const MaskedReference ref = evaluator_.mask_reference(reference_for(scenario), scenario.reference_image_id);
                const EvaluationReport report = evaluator_.evaluate(pool, ref, scenario, run.round);
                for (const auto& c : pool) {
                    if (c.mask) files[mask_artifact(c.candidate_id)] = to_bytes(encode_png(*c.mask));
                }
                files[std::string(kEval)] = to_json(report).dump(2) + "\n";
                e.kind = EventKind::evaluated;
                e.data = {{"advanced", report.advanced},
                          {"selected", report.outcome.selected ? json(*report.outcome.selected) : json(nullptr)},
                          {"disposition", to_string(report.outcome.disposition)}};
                break;
            }
            case RunState::evaluated: {
                stage = "decide";
                e.kind = run.disposition == to_string(Disposition::regenerate) ? EventKind::regenerate
                                                                               : EventKind::present_for_pick;
                break;
            }
            default:
                throw Error("illegal_transition",
                            "state " + std::string(to_string(run.state)) + " has no executable stage");
        }
        return commit(run, std::move(e), files);
    } catch (const IllegalTransition&) {
        throw;
    } catch (const std::exception& ex) {
        if (stage.empty()) throw;
        const auto* err = dynamic_cast<const Error*>(&ex);
        const std::string code = err != nullptr ? err->code() : "internal";
        RunEvent fail;
        fail.kind = EventKind::fail;
        fail.data = {{"stage", stage}, {"code", code}, {"message", ex.what()}};
        commit(run, std::move(fail), {});
        throw StageError(stage, code, "stage " + stage + " failed: " + ex.what());
    }
}

namespace {

void check_version(const PipelineRun& run, std::optional<int> expected) {
    if (expected && *expected != run.version) {
        throw Error("version_conflict", "run " + run.run_id + " is at version " + std::to_string(run.version) +
                                            ", request expected " + std::to_string(*expected));
    }
}

}  // namespace

PipelineRun Engine::execute_stage(const std::string& run_id, std::optional<int> expected_version) {
    auto lock = lock_for(run_id);
    std::lock_guard<std::mutex> guard(*lock);
    const PipelineRun run = store_.load(run_id);
    check_version(run, expected_version);
    return execute_locked(run);
}

PipelineRun Engine::checkpoint(const std::string& run_id, const CheckpointInput& input) {
    auto lock = lock_for(run_id);
    std::lock_guard<std::mutex> guard(*lock);
    const PipelineRun run = store_.load(run_id);
    check_version(run, input.expected_version);
    const EventKind kind = checkpoint_event(input.stage, input.decision);

    if (checkpoint_of(run.state) != input.stage) {
        // Re-approval of the checkpoint just passed is a no-op.
        const auto& last = run.events.back();
        if (input.decision == Decision::approved && last.kind == kind && !input.payload) return run;
        throw IllegalTransition(run.state, kind);
    }

    const std::string artifact = stage_artifact(input.stage);
    const std::string before = run.artifacts.count(artifact) ? run.artifacts.at(artifact) : "";
    RunEvent e;
    e.kind = kind;
    std::map<std::string, std::string> files;
    CheckpointRecord rec;
    rec.stage = input.stage;
    rec.decision = input.decision;
    rec.editor = input.editor.empty() ? config_.auto_editor : input.editor;
    rec.payload_before = before;
    rec.round = run.round;

    switch (input.decision) {
        case Decision::approved: rec.payload_after = before; break;
        case Decision::rejected: break;
        case Decision::edited: {
            if (!input.payload) throw PreconditionError("validation", "an edit requires a payload");
            std::string bytes;
            if (input.stage == CheckpointStage::description) {
                LaneDescription lane = parse_locator_response(*input.payload, {});
                lane.present = true;
                bytes = to_json(lane).dump(2) + "\n";
            } else if (input.stage == CheckpointStage::prompt) {
                if (count_words(*input.payload) == 0) throw PreconditionError("validation", "edited prompt is empty");
                bytes = *input.payload;
                e.data = {{"word_count", count_words(bytes)}, {"length_warning", count_words(bytes) > kPromptWordBudget}};
            } else {
                bytes = to_bytes(encode_png(decode_image(as_span(*input.payload))));
            }
            rec.payload_after = bytes_hash(bytes);
            if (rec.payload_after == before) throw PreconditionError("validation", "edit leaves the payload unchanged");
            files[artifact] = std::move(bytes);
            break;
        }
    }
    e.checkpoint = rec;
    return commit(run, std::move(e), files);
}

PipelineRun Engine::record_expert_pick(const std::string& run_id, std::optional<std::string> candidate_id,
                                       std::optional<ReviseTarget> target, const std::string& editor,
                                       std::optional<int> expected_version) {
    auto lock = lock_for(run_id);
    std::lock_guard<std::mutex> guard(*lock);
    const PipelineRun run = store_.load(run_id);
    check_version(run, expected_version);
    if (run.state != RunState::awaiting_expert_pick) {
        throw IllegalTransition(run.state, target ? EventKind::expert_disagrees : EventKind::expert_agrees);
    }
    if (!candidate_id && run.awaiting_revise_target) candidate_id = run.expert_pick;
    if (candidate_id &&
        std::find(run.advanced.begin(), run.advanced.end(), *candidate_id) == run.advanced.end()) {
        throw PreconditionError("validation", "candidate " + *candidate_id + " is not among the advanced candidates");
    }

    CheckpointRecord rec;
    rec.stage = CheckpointStage::selection;
    rec.editor = editor.empty() ? config_.auto_editor : editor;
    rec.payload_before = sha256_hex(run.agent_selection.value_or("none"));
    rec.payload_after = sha256_hex(candidate_id.value_or("none"));
    rec.round = run.round;

    // With no agent selection (exhausted), any advanced pick is accepted.
    const bool agrees = candidate_id && (!run.agent_selection || *candidate_id == *run.agent_selection);
    RunEvent e;
    e.data = {{"candidate_id", candidate_id ? json(*candidate_id) : json(nullptr)},
              {"agent_selection", run.agent_selection ? json(*run.agent_selection) : json(nullptr)}};
    if (agrees) {
        e.kind = EventKind::expert_agrees;
        rec.decision = Decision::approved;
        e.checkpoint = rec;
    } else if (target) {
        e.kind = EventKind::expert_disagrees;
        e.target = target;
        rec.decision = Decision::rejected;
        e.checkpoint = rec;
    } else {
        if (run.awaiting_revise_target && run.expert_pick == candidate_id) return run;
        e.kind = EventKind::disagreement_recorded;
    }
    return commit(run, std::move(e), {});
}

PipelineRun Engine::resume(const std::string& run_id, std::optional<int> expected_version) {
    auto lock = lock_for(run_id);
    std::lock_guard<std::mutex> guard(*lock);
    const PipelineRun run = store_.load(run_id);
    check_version(run, expected_version);
    RunEvent e;
    e.kind = EventKind::resume;
    e.data = {{"stage", run.failed_stage}};
    const PipelineRun resumed = commit(run, std::move(e), {});
    return execute_locked(resumed);
}

PipelineRun Engine::step(const std::string& run_id, std::optional<int> expected_version) {
    const PipelineRun run = store_.load(run_id);
    check_version(run, expected_version);
    if (is_executable_state(run.state)) return execute_stage(run_id, run.version);
    if (is_terminal_state(run.state) || run.state == RunState::errored) return run;
    if (config_.checkpoint_mode == CheckpointMode::require_human) return run;
    const auto stage = *checkpoint_of(run.state);
    if (stage == CheckpointStage::selection) {
        if (run.awaiting_revise_target) return run;
        std::optional<std::string> pick = run.agent_selection;
        if (!pick && !run.advanced.empty()) pick = run.advanced.front();
        if (!pick) return run;
        return record_expert_pick(run_id, pick, std::nullopt, config_.auto_editor, run.version);
    }
    return checkpoint(run_id, CheckpointInput{stage, Decision::approved, std::nullopt, config_.auto_editor, run.version});
}

PipelineRun Engine::run_to_completion(const std::string& run_id) {
    for (int guard = 0; guard < 1000; ++guard) {
        const PipelineRun before = store_.load(run_id);
        const PipelineRun after = step(run_id);
        if (after.version == before.version) return after;
    }
    throw Error("internal", "run " + run_id + " did not settle");
}

json Engine::candidates(const std::string& run_id) const {
    const PipelineRun run = store_.load(run_id);
    std::optional<EvaluationReport> report;
    if (run.artifacts.count(std::string(kEval))) {
        report = evaluation_report_from_json(json::parse(store_.read_artifact(run, std::string(kEval))));
    }
    const std::string prefix = "candidates/" + round_prefix(run.round);
    json items = json::array();
    for (const auto& [name, hash] : run.artifacts) {
        if (name.rfind(prefix, 0) != 0) continue;
        const std::string id = name.substr(11, name.size() - 11 - 4);
        json item{{"candidate_id", id},
                  {"image", name},
                  {"image_hash", hash},
                  {"advanced", std::find(run.advanced.begin(), run.advanced.end(), id) != run.advanced.end()},
                  {"selected", run.agent_selection == id},
                  {"similarity", nullptr},
                  {"verdict", "pending"}};
        if (const auto m = run.artifacts.find(mask_artifact(id)); m != run.artifacts.end()) {
            item["mask"] = m->first;
            item["mask_hash"] = m->second;
        }
        if (report) {
            for (const auto& entry : report->pool.entries) {
                if (entry.candidate_id != id) continue;
                if (entry.similarity) item["similarity"] = *entry.similarity;
                if (!entry.error.empty()) item["error"] = entry.error;
            }
            if (const auto v = report->outcome.verdicts.find(id); v != report->outcome.verdicts.end()) {
                item["verdict"] = to_string(v->second);
            }
        }
        items.push_back(std::move(item));
    }
    json out{{"run_id", run.run_id},
             {"round", run.round},
             {"state", to_string(run.state)},
             {"version", run.version},
             {"disposition", run.disposition},
             {"agent_selection", run.agent_selection ? json(*run.agent_selection) : json(nullptr)},
             {"candidates", items}};
    if (const auto h = run.artifacts.find(std::string(kHighlight)); h != run.artifacts.end()) {
        out["highlight"] = h->first;
        out["highlight_hash"] = h->second;
    }
    return out;
}

}  // namespace bikeflow

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bikeflow/agents.hpp"
#include "bikeflow/clock.hpp"
#include "bikeflow/domain.hpp"
#include "bikeflow/errors.hpp"
#include "bikeflow/evaluator.hpp"
#include "bikeflow/providers.hpp"
#include "bikeflow/templates.hpp"

namespace bikeflow {

enum class RunState {
    created,
    located,
    description_approved,
    prompt_optimized,
    prompt_approved,
    highlighted,
    highlight_approved,
    pool_generated,
    evaluated,
    awaiting_expert_pick,
    finalized,
    excluded,
    errored,
};

inline constexpr RunState kAllStates[] = {
    RunState::created,          RunState::located,         RunState::description_approved,
    RunState::prompt_optimized, RunState::prompt_approved, RunState::highlighted,
    RunState::highlight_approved, RunState::pool_generated, RunState::evaluated,
    RunState::awaiting_expert_pick, RunState::finalized,   RunState::excluded,
    RunState::errored,
};

enum class EventKind {
    created,
    located,
    lane_absent,
    approve_description,
    edit_description,
    reject_description,
    prompt_optimized,
    approve_prompt,
    edit_prompt,
    reject_prompt,
    highlighted,
    approve_highlight,
    edit_highlight,
    reject_highlight,
    pool_generated,
    evaluated,
    regenerate,
    present_for_pick,
    expert_agrees,
    disagreement_recorded,
    expert_disagrees,
    fail,
    resume,
};

inline constexpr EventKind kAllEvents[] = {
    EventKind::created,           EventKind::located,          EventKind::lane_absent,
    EventKind::approve_description, EventKind::edit_description, EventKind::reject_description,
    EventKind::prompt_optimized,  EventKind::approve_prompt,   EventKind::edit_prompt,
    EventKind::reject_prompt,     EventKind::highlighted,      EventKind::approve_highlight,
    EventKind::edit_highlight,    EventKind::reject_highlight, EventKind::pool_generated,
    EventKind::evaluated,         EventKind::regenerate,       EventKind::present_for_pick,
    EventKind::expert_agrees,     EventKind::disagreement_recorded, EventKind::expert_disagrees,
    EventKind::fail,              EventKind::resume,
};

enum class CheckpointStage { description, prompt, highlight, selection };
enum class Decision { approved, edited, rejected };
enum class ReviseTarget { description, prompt, highlight };
enum class CheckpointMode { auto_approve, require_human };

[[nodiscard]] std::string_view to_string(RunState s);
[[nodiscard]] std::string_view to_string(EventKind e);
[[nodiscard]] std::string_view to_string(CheckpointStage s);
[[nodiscard]] std::string_view to_string(Decision d);
[[nodiscard]] std::string_view to_string(ReviseTarget t);
[[nodiscard]] RunState run_state_from_string(std::string_view text);
[[nodiscard]] EventKind event_kind_from_string(std::string_view text);
[[nodiscard]] CheckpointStage checkpoint_stage_from_string(std::string_view text);
[[nodiscard]] Decision decision_from_string(std::string_view text);
[[nodiscard]] ReviseTarget revise_target_from_string(std::string_view text);

/// Checkpoint states wait for a human decision; terminal states accept nothing.
[[nodiscard]] bool is_checkpoint_state(RunState s);
[[nodiscard]] bool is_terminal_state(RunState s);
/// States in which execute_stage has work to do.
[[nodiscard]] bool is_executable_state(RunState s);
[[nodiscard]] std::optional<CheckpointStage> checkpoint_of(RunState s);
/// State a disagreement sends the run back to.
[[nodiscard]] RunState revise_state(ReviseTarget target);

class IllegalTransition : public Error {
  public:
    IllegalTransition(RunState state, EventKind event, const std::string& detail = {});

    [[nodiscard]] RunState state() const noexcept { return state_; }
    [[nodiscard]] EventKind event() const noexcept { return event_; }

  private:
    RunState state_;
    EventKind event_;
};

/// The transition graph. Returns nullopt for an illegal pair. Round-bumping
/// events are legal only while round < max_rounds; resume returns to
/// `failed_from`.
[[nodiscard]] std::optional<RunState> transition(RunState state, EventKind event, std::optional<ReviseTarget> target,
                                                 int round, int max_rounds, std::optional<RunState> failed_from);

struct CheckpointRecord {
    CheckpointStage stage = CheckpointStage::description;
    Decision decision = Decision::approved;
    std::string editor;
    std::string payload_before;  // content hashes
    std::string payload_after;
    std::string timestamp;
    int round = 1;

    friend bool operator==(const CheckpointRecord&, const CheckpointRecord&) = default;
};

struct StaleArtifact {
    std::string name;
    std::string hash;
    std::string path;  // relative to the run directory
    int version = 0;

    friend bool operator==(const StaleArtifact&, const StaleArtifact&) = default;
};

struct RunEvent {
    EventKind kind = EventKind::created;
    std::optional<ReviseTarget> target;
    std::map<std::string, std::string> artifacts;  // name -> content hash written by this event
    std::optional<CheckpointRecord> checkpoint;
    nlohmann::json data = nlohmann::json::object();
    std::string timestamp;
    int version = 0;  // run version after this event

    friend bool operator==(const RunEvent&, const RunEvent&) = default;
};

[[nodiscard]] nlohmann::json to_json(const RunEvent& e);
[[nodiscard]] RunEvent run_event_from_json(const nlohmann::json& j);

struct PipelineRun {
    std::string run_id;
    std::string scene_id;
    int scenario_id = 0;
    RunState state = RunState::created;
    int round = 1;
    int max_rounds = kDefaultMaxRounds;
    int pool_size = 6;
    std::string user_prompt;
    std::string highlight_color = "green";
    std::vector<CheckpointRecord> checkpoints;
    std::map<std::string, std::string> artifacts;  // current name -> content hash
    std::vector<StaleArtifact> stale;
    int version = 0;

    std::optional<RunState> failed_from;
    std::string failed_stage;
    std::string last_error;

    std::vector<std::string> advanced;
    std::optional<std::string> agent_selection;
    std::string disposition;
    std::optional<std::string> expert_pick;
    bool awaiting_revise_target = false;

    nlohmann::json provenance = nlohmann::json::object();
    std::vector<RunEvent> events;

    friend bool operator==(const PipelineRun&, const PipelineRun&) = default;
};

/// Summary without the event history.
[[nodiscard]] nlohmann::json to_json(const PipelineRun& run);

/// Artifact names that stop being current when a run moves from `run` to
/// `next` (downstream of the state reached).
[[nodiscard]] std::vector<std::string> invalidated_artifacts(const PipelineRun& run, RunState next);

/// Applies one event: validates the transition, moves invalidated or
/// overwritten artifacts to `stale/v<version>/`, records checkpoint and data.
/// Throws IllegalTransition without touching `run`.
[[nodiscard]] PipelineRun advance(const PipelineRun& run, RunEvent event);

/// Folds a log from the `created` event.
[[nodiscard]] PipelineRun replay(const std::vector<RunEvent>& events);

/// Run directories under one root: `<root>/<run_id>/run.log` plus artifacts.
class RunStore {
  public:
    explicit RunStore(std::filesystem::path root);

    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }
    [[nodiscard]] std::filesystem::path run_dir(const std::string& run_id) const;
    [[nodiscard]] bool exists(const std::string& run_id) const;
    [[nodiscard]] std::vector<std::string> list() const;

    /// Writes the event log. Artifacts are written separately.
    void persist(const PipelineRun& run) const;
    /// Replays the log and verifies every artifact hash. Throws NotFoundError
    /// for unknown ids and IntegrityError naming a tampered artifact.
    [[nodiscard]] PipelineRun load(const std::string& run_id) const;

    [[nodiscard]] std::string read_artifact(const PipelineRun& run, const std::string& name) const;
    [[nodiscard]] std::string read_blob(const std::string& run_id, const std::string& relative_path) const;

  private:
    std::filesystem::path root_;
};

/// Raised when a stage fails; the run has already moved to Errored.
class StageError : public Error {
  public:
    StageError(std::string stage, std::string cause_code, const std::string& message)
        : Error(cause_code, message), stage_(std::move(stage)) {}

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

  private:
    std::string stage_;
};

struct EngineConfig {
    std::filesystem::path runs_dir = "runs";
    std::filesystem::path references_dir;  // ds<N>.png; empty means render schematic references
    AgentConfig agents;
    EvaluatorConfig evaluator;
    CheckpointMode checkpoint_mode = CheckpointMode::auto_approve;
    std::string auto_editor = "auto";
    std::string default_user_prompt = "Redesign the existing bike lane to match the design scenario.";
};

struct CreateRunRequest {
    Image scene_image;
    std::string scene_id;  // defaults to the image content hash prefix
    std::string location_id;
    int scenario_id = 0;
    int pool_size = 6;
    std::optional<std::string> run_id;
    std::optional<std::string> user_prompt;
    std::optional<std::string> highlight_color;
    std::uint64_t seed = 0;  // recorded for provenance and run-id derivation
};

/// Artifact payload for a checkpoint edit: text for description/prompt,
/// PNG bytes for highlight.
struct CheckpointInput {
    CheckpointStage stage = CheckpointStage::description;
    Decision decision = Decision::approved;
    std::optional<std::string> payload;
    std::string editor;
    std::optional<int> expected_version;
};

class Engine {
  public:
    Engine(EngineConfig config, ProviderSet providers, TemplateLibrary templates,
           std::shared_ptr<Clock> clock = std::make_shared<SystemClock>());

    [[nodiscard]] PipelineRun create_run(const CreateRunRequest& request);
    [[nodiscard]] PipelineRun load(const std::string& run_id) const { return store_.load(run_id); }
    [[nodiscard]] std::vector<std::string> list_runs() const { return store_.list(); }

    /// Runs the work for the current executable state.
    PipelineRun execute_stage(const std::string& run_id, std::optional<int> expected_version = std::nullopt);
    PipelineRun checkpoint(const std::string& run_id, const CheckpointInput& input);
    /// Agreement finalizes. Disagreement moves back to `target`, or records a
    /// pending disagreement when no target is named yet.
    PipelineRun record_expert_pick(const std::string& run_id, std::optional<std::string> candidate_id,
                                   std::optional<ReviseTarget> target, const std::string& editor,
                                   std::optional<int> expected_version = std::nullopt);
    PipelineRun resume(const std::string& run_id, std::optional<int> expected_version = std::nullopt);

    /// One step forward: executes the current stage or, in auto-approve mode,
    /// passes the pending checkpoint. Returns the run unchanged when it is
    /// terminal, Errored, or waiting on a human.
    PipelineRun step(const std::string& run_id, std::optional<int> expected_version = std::nullopt);

    /// Executes stages and, in auto-approve mode, passes every checkpoint
    /// until the run is terminal, Errored, or waiting on a human.
    PipelineRun run_to_completion(const std::string& run_id);

    /// Candidate metadata for the current round, with URLs relative to the run.
    [[nodiscard]] nlohmann::json candidates(const std::string& run_id) const;

    [[nodiscard]] const RunStore& store() const noexcept { return store_; }
    [[nodiscard]] const EngineConfig& config() const noexcept { return config_; }

  private:
    std::shared_ptr<std::mutex> lock_for(const std::string& run_id);
    PipelineRun commit(const PipelineRun& run, RunEvent event, const std::map<std::string, std::string>& files);
    PipelineRun execute_locked(const PipelineRun& run);
    [[nodiscard]] Image reference_for(const DesignScenario& scenario) const;

    EngineConfig config_;
    ProviderSet providers_;
    TemplateLibrary templates_;
    DesignAgents agents_;
    Evaluator evaluator_;
    std::shared_ptr<Clock> clock_;
    RunStore store_;
    std::mutex locks_mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> locks_;
};

/// Deterministic run id from the scene hash, scenario, seed and pool size.
[[nodiscard]] std::string derive_run_id(const std::string& scene_hash, int scenario_id, std::uint64_t seed,
                                        int pool_size);

/// Candidate file name inside a run: "candidates/<id>.png".
[[nodiscard]] std::string candidate_artifact(const std::string& candidate_id);
[[nodiscard]] std::string mask_artifact(const std::string& candidate_id);

}  // namespace bikeflow

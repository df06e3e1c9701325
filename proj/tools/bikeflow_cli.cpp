#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bikeflow/config.hpp"
#include "bikeflow/digest.hpp"
#include "bikeflow/ingest.hpp"
#include "bikeflow/lane_sketch.hpp"
#include "bikeflow/metrics.hpp"
#include "bikeflow/orchestrator.hpp"
#include "bikeflow/service.hpp"

namespace fs = std::filesystem;
using namespace bikeflow;
using nlohmann::json;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string runs_dir;
    bool mock = false;
    std::optional<std::uint64_t> seed;
};

AppConfig resolve_config(const CommonOptions& o) {
    AppConfig c = o.config_path.empty() ? default_config() : load_config(o.config_path);
    if (!o.runs_dir.empty()) c.engine.runs_dir = o.runs_dir;
    if (o.mock) c.providers.mode = ProviderMode::mock;
    if (o.seed) c.providers.seed = *o.seed;
    return c;
}

std::shared_ptr<Engine> make_engine(const AppConfig& c) {
    auto providers = build_providers(c.providers, std::make_shared<RealSleeper>());
    return std::make_shared<Engine>(c.engine, providers, load_templates(c));
}

void add_common(CLI::App* cmd, CommonOptions& o, bool with_mock = true) {
    cmd->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--runs-dir", o.runs_dir, "Directory holding run directories");
    if (with_mock) {
        cmd->add_flag("--mock", o.mock, "Use the deterministic mock providers");
        cmd->add_option("--seed", o.seed, "Mock provider seed");
    }
}

void print_run(const PipelineRun& run) { std::cout << to_json(run).dump(2) << "\n"; }

std::string eval_summary(const EvaluationReport& r) {
    std::string out = "round " + std::to_string(r.round) + "\n";
    for (const auto& e : r.pool.entries) {
        char line[160];
        if (e.similarity) {
            std::snprintf(line, sizeof line, "  %-10s %.6f%s", e.candidate_id.c_str(), *e.similarity,
                          e.empty_mask ? " (empty mask)" : "");
        } else {
            std::snprintf(line, sizeof line, "  %-10s unscored: %s", e.candidate_id.c_str(), e.error.c_str());
        }
        out += line;
        if (const auto v = r.outcome.verdicts.find(e.candidate_id); v != r.outcome.verdicts.end()) {
            out += "  compliance=" + std::string(to_string(v->second));
        }
        out += "\n";
    }
    out += "disposition: " + std::string(to_string(r.outcome.disposition));
    if (r.outcome.selected) out += " (" + *r.outcome.selected + ")";
    return out + "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent bike-lane design pipeline"};
    app.require_subcommand(1);

    // run
    CommonOptions run_opts;
    std::string scene_path, run_id, user_prompt, color, qc_item, qc_scene;
    int scenario = 0;
    int pool_size = 6;
    bool interactive = false;
    auto* run_cmd = app.add_subcommand("run", "Create a run and drive it as far as the checkpoint mode allows");
    add_common(run_cmd, run_opts);
    auto* scene_opt = run_cmd->add_option("--scene", scene_path, "Street-level image (PNG/JPEG)")->check(CLI::ExistingFile);
    auto* qc_opt = run_cmd->add_option("--qc-item", qc_item, "QC item supplying the scene");
    run_cmd->add_option("--scene-id", qc_scene, "Scene id (with --qc-item: the chosen view)");
    scene_opt->excludes(qc_opt);
    run_cmd->add_option("--scenario", scenario, "Design scenario id")
        ->required()
        ->check(CLI::Range(1, kScenarioCount));
    run_cmd->add_option("--pool-size", pool_size, "Candidates per generation round");
    run_cmd->add_option("--run-id", run_id, "Explicit run id");
    run_cmd->add_option("--prompt", user_prompt, "User design prompt");
    run_cmd->add_option("--color", color, "Highlight color");
    run_cmd->add_flag("--interactive", interactive, "Stop at every human checkpoint");

    // resume
    CommonOptions resume_opts;
    std::string resume_id;
    auto* resume_cmd = app.add_subcommand("resume", "Retry the failed stage of an errored run and continue");
    add_common(resume_cmd, resume_opts);
    resume_cmd->add_option("--run-id", resume_id, "Run to resume")->required();

    // eval
    CommonOptions eval_opts;
    std::string eval_id;
    bool eval_json = false;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a generated pool (if pending) and print the ranking");
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("--run-id", eval_id, "Run to evaluate")->required();
    eval_cmd->add_flag("--json", eval_json, "Print eval.json");

    // report
    std::string labels_path, report_runs;
    bool report_json = false;
    auto* report_cmd = app.add_subcommand("report", "Evaluator accuracy per design scenario against gold labels");
    report_cmd->add_option("--labels", labels_path, "Gold CSV: case_id,scenario_id,correct_candidate_id")
        ->required()
        ->check(CLI::ExistingFile);
    report_cmd->add_option("--runs", report_runs, "Run directory root")->required()->check(CLI::ExistingDirectory);
    report_cmd->add_flag("--json", report_json, "JSON output");

    // ingest
    CommonOptions ingest_opts;
    std::string manifest, qc_dir;
    std::vector<double> headings;
    int size = 0;
    bool synthetic = false;
    auto* ingest_cmd = app.add_subcommand("ingest", "Fetch street-level views for a manifest and queue them for QC");
    add_common(ingest_cmd, ingest_opts);
    ingest_cmd->add_option("--manifest", manifest, "CSV: location_id,lat,lon,context_tag")->required()->check(CLI::ExistingFile);
    ingest_cmd->add_option("--headings", headings, "Comma-separated headings")->delimiter(',');
    ingest_cmd->add_option("--size", size, "Square image size in pixels");
    ingest_cmd->add_option("--qc-dir", qc_dir, "QC store directory");
    ingest_cmd->add_flag("--synthetic", synthetic, "Render synthetic streets instead of calling the imagery API");

    // serve
    CommonOptions serve_opts;
    std::string host;
    int port = -1;
    std::string serve_qc_dir;
    auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
    add_common(serve_cmd, serve_opts);
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port");
    serve_cmd->add_option("--qc-dir", serve_qc_dir, "QC store directory");

    // scenarios / references
    std::string scenarios_out, references_out;
    int reference_size = 256;
    auto* scenarios_cmd = app.add_subcommand("scenarios", "Print or write the design scenario catalog");
    scenarios_cmd->add_option("--out", scenarios_out, "Write scenarios.json here");
    auto* refs_cmd = app.add_subcommand("references", "Render the schematic reference designs ds1..ds8");
    refs_cmd->add_option("--out", references_out, "Output directory")->required();
    refs_cmd->add_option("--size", reference_size, "Image size");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            AppConfig c = resolve_config(run_opts);
            if (interactive) c.engine.checkpoint_mode = CheckpointMode::require_human;
            auto engine = make_engine(c);
            CreateRunRequest req;
            req.scenario_id = scenario;
            req.pool_size = pool_size;
            req.seed = c.providers.seed;
            if (!run_id.empty()) req.run_id = run_id;
            if (!user_prompt.empty()) req.user_prompt = user_prompt;
            if (!color.empty()) req.highlight_color = color;
            if (!qc_item.empty()) {
                if (qc_scene.empty()) throw PreconditionError("validation", "--qc-item needs --scene-id");
                QcStore qc(c.qc_dir);
                req.scene_image = qc.scene_image(qc_item, qc_scene);
                req.location_id = qc.item(qc_item).location_id;
                req.scene_id = qc_scene;
            } else if (!scene_path.empty()) {
                req.scene_image = read_image(scene_path);
                req.scene_id = qc_scene.empty() ? fs::path(scene_path).stem().string() : qc_scene;
            } else {
                throw PreconditionError("validation", "one of --scene or --qc-item is required");
            }
            const PipelineRun created = engine->create_run(req);
            print_run(engine->run_to_completion(created.run_id));
        } else if (resume_cmd->parsed()) {
            auto engine = make_engine(resolve_config(resume_opts));
            engine->resume(resume_id);
            print_run(engine->run_to_completion(resume_id));
        } else if (eval_cmd->parsed()) {
            auto engine = make_engine(resolve_config(eval_opts));
            PipelineRun run = engine->load(eval_id);
            if (run.state == RunState::pool_generated) run = engine->execute_stage(eval_id);
            if (!run.artifacts.count("eval.json")) throw PreconditionError("validation", "run " + eval_id + " has no evaluation yet");
            const std::string text = engine->store().read_artifact(run, "eval.json");
            if (eval_json) {
                std::cout << text;
            } else {
                std::cout << eval_summary(evaluation_report_from_json(json::parse(text)));
            }
        } else if (report_cmd->parsed()) {
            const auto table = evaluator_accuracy(read_gold_labels(labels_path), agent_picks(RunStore(report_runs)));
            std::cout << (report_json ? table.to_json().dump(2) + "\n" : table.to_text());
        } else if (ingest_cmd->parsed()) {
            AppConfig c = resolve_config(ingest_opts);
            if (synthetic || ingest_opts.mock) c.imagery.source = "synthetic";
            if (!qc_dir.empty()) c.qc_dir = qc_dir;
            IngestOptions opt = c.imagery.options;
            if (!headings.empty()) opt.headings = headings;
            if (size > 0) opt.size = size;
            auto source = build_imagery(c.imagery, c.providers.seed);
            QcStore qc(c.qc_dir);
            RealSleeper sleeper;
            RetryPolicy retry{c.imagery.api.max_retries,
                              std::chrono::milliseconds(static_cast<long long>(c.imagery.api.retry_backoff_s * 1000))};
            const auto summary = ingest_locations(read_manifest(manifest), opt, *source, qc, retry, sleeper);
            std::cout << summary.to_json().dump(2) << "\n";
            if (!summary.failed.empty()) return 1;
        } else if (serve_cmd->parsed()) {
            AppConfig c = resolve_config(serve_opts);
            if (!serve_qc_dir.empty()) c.qc_dir = serve_qc_dir;
            if (!host.empty()) c.service.host = host;
            if (port >= 0) c.service.port = port;
            ServiceDeps deps;
            deps.engine = make_engine(c);
            deps.qc = std::make_shared<QcStore>(c.qc_dir);
            if (serve_opts.mock) c.imagery.source = "synthetic";
            deps.imagery = build_imagery(c.imagery, c.providers.seed);
            deps.sleeper = std::make_shared<RealSleeper>();
            deps.ingest_defaults = c.imagery.options;
            deps.imagery_retry = c.providers.retry;
            if (!c.service.token_ref.empty()) {
                const char* token = std::getenv(c.service.token_ref.c_str());
                if (token == nullptr || *token == '\0') {
                    throw PreconditionError("validation", "API token variable " + c.service.token_ref + " is not set");
                }
                deps.api_token = token;
            }
            Service service(std::move(deps));
            std::cerr << "serving on " << c.service.host << ":" << c.service.port << "\n";
            service.listen(c.service.host, c.service.port);
        } else if (scenarios_cmd->parsed()) {
            const std::string text = catalog_to_json(scenario_catalog()).dump(2) + "\n";
            if (scenarios_out.empty()) {
                std::cout << text;
            } else {
                write_file_atomic(scenarios_out, text);
            }
        } else if (refs_cmd->parsed()) {
            for (const auto& s : scenario_catalog()) {
                const fs::path p = fs::path(references_out) / ("ds" + std::to_string(s.scenario_id) + ".png");
                write_png(p, reference_design_image(s, reference_size));
                std::cout << p.string() << "\n";
            }
        }
    } catch (const StageError& e) {
        std::cerr << "error [" << e.code() << "] in stage " << e.stage() << ": " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
        const bool usage = e.code() == "validation" || e.code() == "precondition" || e.code() == "unknown_scenario";
        return usage ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

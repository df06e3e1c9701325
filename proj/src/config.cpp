#include "bikeflow/config.hpp"

#include <set>

#include "bikeflow/digest.hpp"
#include "bikeflow/fixtures.hpp"
#include "bikeflow/http_provider.hpp"
#include "bikeflow/mock_provider.hpp"

namespace bikeflow {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (key.rfind("_", 0) == 0) continue;  // "_comment" style annotations
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw PreconditionError("validation", "unknown config key " + where + key);
        }
    }
}

Rgb rgb_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw PreconditionError("validation", "colors are [r,g,b] arrays");
    auto c = [&](std::size_t i) {
        const int v = j.at(i).get<int>();
        if (v < 0 || v > 255) throw PreconditionError("validation", "color channel outside 0..255");
        return static_cast<std::uint8_t>(v);
    };
    return {c(0), c(1), c(2)};
}

}  // namespace

ProviderMode provider_mode_from_string(std::string_view t) {
    if (t == "mock") return ProviderMode::mock;
    if (t == "http") return ProviderMode::http;
    if (t == "record") return ProviderMode::record;
    if (t == "replay") return ProviderMode::replay;
    throw PreconditionError("validation", "unknown provider mode: " + std::string(t));
}

std::string_view to_string(ProviderMode m) {
    switch (m) {
        case ProviderMode::mock: return "mock";
        case ProviderMode::http: return "http";
        case ProviderMode::record: return "record";
        case ProviderMode::replay: return "replay";
    }
    return "mock";
}

AppConfig default_config() { return config_from_json(json::object()); }

AppConfig config_from_json(const json& j) {
    reject_unknown(j,
                   {"runs_dir", "qc_dir", "references_dir", "templates_dir", "checkpoint_mode", "user_prompt",
                    "highlight_color", "absence_phrases", "second_step_input", "parallel", "max_rounds",
                    "advance_count", "verdict_parsing", "mask_fill", "providers", "imagery", "service"},
                   "");
    AppConfig c;
    auto& e = c.engine;
    e.runs_dir = j.value("runs_dir", e.runs_dir.string());
    c.qc_dir = j.value("qc_dir", c.qc_dir.string());
    e.references_dir = j.value("references_dir", std::string());
    c.templates_dir = j.value("templates_dir", std::string());
    const std::string mode = j.value("checkpoint_mode", "auto_approve");
    if (mode == "auto_approve") e.checkpoint_mode = CheckpointMode::auto_approve;
    else if (mode == "require_human") e.checkpoint_mode = CheckpointMode::require_human;
    else throw PreconditionError("validation", "checkpoint_mode must be auto_approve or require_human");
    e.default_user_prompt = j.value("user_prompt", e.default_user_prompt);
    e.agents.highlight_color = j.value("highlight_color", e.agents.highlight_color);
    e.agents.absence_phrases = j.value("absence_phrases", e.agents.absence_phrases);
    const std::string second = j.value("second_step_input", "highlight");
    if (second == "highlight") e.agents.second_step_input = SecondStepInput::highlight;
    else if (second == "scene") e.agents.second_step_input = SecondStepInput::scene;
    else throw PreconditionError("validation", "second_step_input must be highlight or scene");
    e.agents.parallel_generation = j.value("parallel", true);
    e.evaluator.parallel = e.agents.parallel_generation;
    e.evaluator.max_rounds = j.value("max_rounds", kDefaultMaxRounds);
    e.evaluator.advance_count = j.value("advance_count", kAdvanceCount);
    if (e.evaluator.max_rounds < 1) throw PreconditionError("validation", "max_rounds must be >= 1");
    if (e.evaluator.advance_count < 1) throw PreconditionError("validation", "advance_count must be >= 1");
    const std::string parsing = j.value("verdict_parsing", "lenient");
    if (parsing == "lenient") e.evaluator.parsing = VerdictParsing::lenient;
    else if (parsing == "strict") e.evaluator.parsing = VerdictParsing::strict;
    else throw PreconditionError("validation", "verdict_parsing must be strict or lenient");
    if (j.contains("mask_fill")) e.evaluator.mask_fill = rgb_from_json(j.at("mask_fill"));

    const json p = j.value("providers", json::object());
    reject_unknown(p, {"mode", "seed", "fixtures_dir", "max_retries", "retry_backoff_s", "concurrency", "editor", "locator",
                       "optimizer", "judge", "embedder", "segmenter"},
                   "providers.");
    c.providers.mode = provider_mode_from_string(p.value("mode", "mock"));
    c.providers.seed = p.value("seed", std::uint64_t{0});
    c.providers.fixtures_dir = p.value("fixtures_dir", c.providers.fixtures_dir.string());
    c.providers.retry.max_retries = p.value("max_retries", 3);
    c.providers.retry.base_backoff =
        std::chrono::milliseconds(static_cast<long long>(p.value("retry_backoff_s", 1.0) * 1000.0));
    c.providers.concurrency = p.value("concurrency", 4);
    if (c.providers.retry.max_retries < 0) throw PreconditionError("validation", "providers.max_retries must be >= 0");
    if (c.providers.concurrency < 1) throw PreconditionError("validation", "providers.concurrency must be >= 1");
    for (const char* role : kProviderRoles) {
        c.providers.roles[role] = provider_config_from_json(p.value(role, json::object()));
    }

    const json im = j.value("imagery", json::object());
    reject_unknown(im, {"source", "endpoint", "credential_ref", "timeout_s", "max_retries", "retry_backoff_s", "headings",
                        "pitch", "fov", "size"},
                   "imagery.");
    c.imagery.source = im.value("source", c.imagery.source);
    if (c.imagery.source != "street_view" && c.imagery.source != "synthetic") {
        throw PreconditionError("validation", "imagery.source must be street_view or synthetic");
    }
    c.imagery.api = provider_config_from_json(im);
    c.imagery.options.headings = im.value("headings", c.imagery.options.headings);
    c.imagery.options.pitch = im.value("pitch", c.imagery.options.pitch);
    c.imagery.options.fov = im.value("fov", c.imagery.options.fov);
    c.imagery.options.size = im.value("size", c.imagery.options.size);

    const json s = j.value("service", json::object());
    reject_unknown(s, {"host", "port", "token_ref"}, "service.");
    c.service.host = s.value("host", c.service.host);
    c.service.port = s.value("port", c.service.port);
    c.service.token_ref = s.value("token_ref", c.service.token_ref);
    if (c.service.port < 0 || c.service.port > 65535) throw PreconditionError("validation", "service.port out of range");
    return c;
}

AppConfig load_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file_text(path), nullptr, true, true);
    } catch (const json::exception& ex) {
        throw PreconditionError("validation", "config " + path.string() + ": " + ex.what());
    }
    return config_from_json(j);
}

TemplateLibrary load_templates(const AppConfig& config) {
    if (config.templates_dir.empty()) return TemplateLibrary::builtin();
    return TemplateLibrary::from_directory(config.templates_dir);
}

ProviderSet build_providers(const ProvidersSettings& settings, std::shared_ptr<Sleeper> sleeper) {
    ProviderSet inner;
    auto http_set = [&] {
        ProviderSet set;
        auto role = [&](const char* name) { return std::make_shared<HttpProvider>(settings.roles.at(name)); };
        set.editor = role("editor");
        set.locator = role("locator");
        set.optimizer = role("optimizer");
        set.judge = role("judge");
        set.embedder = role("embedder");
        set.segmenter = role("segmenter");
        return set;
    };
    switch (settings.mode) {
        case ProviderMode::mock:
            inner = MockProvider::as_provider_set(std::make_shared<MockProvider>(default_mock_script(settings.seed)));
            break;
        case ProviderMode::http: inner = http_set(); break;
        case ProviderMode::record:
            inner = record_providers(http_set(), std::make_shared<FixtureStore>(settings.fixtures_dir));
            break;
        case ProviderMode::replay:
            inner = replay_providers(std::make_shared<FixtureStore>(settings.fixtures_dir));
            break;
    }
    return guard_providers(inner, settings.retry, settings.concurrency, std::move(sleeper));
}

std::unique_ptr<ImagerySource> build_imagery(const ImagerySettings& settings, std::uint64_t seed) {
    if (settings.source == "synthetic") return std::make_unique<SyntheticImagerySource>(seed);
    return std::make_unique<StreetViewSource>(settings.api);
}

}  // namespace bikeflow

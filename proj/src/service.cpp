#include "bikeflow/service.hpp"

#include <thread>

#include <httplib.h>

#include "bikeflow/digest.hpp"
#include "bikeflow/metrics.hpp"
#include "bikeflow/templates.hpp"

namespace bikeflow {

using nlohmann::json;

std::string_view to_string(ApiErrorCode code) {
    switch (code) {
        case ApiErrorCode::not_found: return "not_found";
        case ApiErrorCode::illegal_transition: return "illegal_transition";
        case ApiErrorCode::validation: return "validation";
        case ApiErrorCode::provider_failure: return "provider_failure";
        case ApiErrorCode::integrity: return "integrity";
    }
    return "validation";
}

int ApiError::http_status() const {
    switch (code) {
        case ApiErrorCode::not_found: return 404;
        case ApiErrorCode::illegal_transition: return 409;
        case ApiErrorCode::validation: return 400;
        case ApiErrorCode::provider_failure: return 502;
        case ApiErrorCode::integrity: return 500;
    }
    return 500;
}

json ApiError::to_json() const {
    json e{{"code", to_string(code)}, {"message", message}, {"detail", detail}};
    e["stage"] = stage ? json(*stage) : json(nullptr);
    return {{"error", e}};
}

ApiError api_error_from(const std::exception& ex) {
    ApiError api;
    api.message = ex.what();
    const auto* err = dynamic_cast<const Error*>(&ex);
    if (err == nullptr) {
        api.code = dynamic_cast<const json::exception*>(&ex) != nullptr ? ApiErrorCode::validation
                                                                          : ApiErrorCode::integrity;
        api.detail = api.code == ApiErrorCode::validation ? "bad_json" : "internal";
        return api;
    }
    api.detail = err->code();
    if (const auto* stage = dynamic_cast<const StageError*>(&ex)) api.stage = stage->stage();
    const std::string& c = err->code();
    if (c == "not_found") {
        api.code = ApiErrorCode::not_found;
    } else if (c == "illegal_transition" || c == "version_conflict" || c == "conflict" || c == "already_decided") {
        api.code = ApiErrorCode::illegal_transition;
    } else if (c == "integrity" || c == "internal") {
        api.code = ApiErrorCode::integrity;
    } else if (dynamic_cast<const ProviderError*>(&ex) != nullptr || api.stage) {
        api.code = ApiErrorCode::provider_failure;
    } else {
        api.code = ApiErrorCode::validation;
    }
    return api;
}

std::map<std::string, std::string> agent_picks(const RunStore& store) {
    std::map<std::string, std::string> picks;
    for (const auto& id : store.list()) {
        const PipelineRun run = store.load(id);
        if (run.disposition.empty()) continue;
        picks[id] = run.agent_selection.value_or("none");
    }
    return picks;
}

namespace {

std::string content_type_for(const std::string& name) {
    if (name.ends_with(".png")) return "image/png";
    if (name.ends_with(".json")) return "application/json";
    return "text/plain; charset=utf-8";
}

std::optional<int> expected_version(const httplib::Request& req, const json& body) {
    if (body.contains("expected_version") && !body.at("expected_version").is_null()) {
        return body.at("expected_version").get<int>();
    }
    if (req.has_header("If-Match")) {
        std::string v = req.get_header_value("If-Match");
        v.erase(std::remove(v.begin(), v.end(), '"'), v.end());
        try {
            return std::stoi(v);
        } catch (const std::exception&) {
            throw PreconditionError("validation", "If-Match must carry a run version");
        }
    }
    return std::nullopt;
}

json with_urls(json candidates) {
    const std::string base = "/runs/" + candidates.at("run_id").get<std::string>() + "/blobs/";
    for (auto& c : candidates.at("candidates")) {
        c["image_url"] = base + c.at("image_hash").get<std::string>();
        if (c.contains("mask_hash")) c["mask_url"] = base + c.at("mask_hash").get<std::string>();
    }
    if (candidates.contains("highlight_hash")) {
        candidates["highlight_url"] = base + candidates.at("highlight_hash").get<std::string>();
    }
    return candidates;
}

}  // namespace

struct Service::Impl {
    ServiceDeps deps;
    httplib::Server server;
    std::thread thread;

    explicit Impl(ServiceDeps d) : deps(std::move(d)) { routes(); }

    template <typename F>
    httplib::Server::Handler handle(F&& f, int success_status = 200) {
        return [this, f = std::forward<F>(f), success_status](const httplib::Request& req, httplib::Response& res) {
            try {
                if (!deps.api_token.empty() &&
                    req.get_header_value("Authorization") != "Bearer " + deps.api_token) {
                    res.status = 401;
                    res.set_content(R"({"error":{"code":"validation","message":"missing or invalid token","detail":"auth","stage":null}})",
                                    "application/json");
                    return;
                }
                const json body = req.body.empty() ? json::object() : json::parse(req.body);
                json out = f(req, body, res);
                if (res.status == -1 || res.status == 0 || res.status == 200) res.status = success_status;
                if (!out.is_null()) {
                    if (out.is_object() && out.contains("version") && out.at("version").is_number_integer()) {
                        res.set_header("ETag", "\"" + std::to_string(out.at("version").get<int>()) + "\"");
                    }
                    res.set_content(out.dump(), "application/json");
                }
            } catch (const std::exception& e) {
                const ApiError api = api_error_from(e);
                res.status = api.http_status();
                res.set_content(api.to_json().dump(), "application/json");
            }
        };
    }

    Engine& engine() { return *deps.engine; }

    void routes() {
        using Req = httplib::Request;
        using Res = httplib::Response;

        server.Get("/scenarios", handle([](const Req&, const json&, Res&) { return catalog_to_json(scenario_catalog()); }));

        server.Get("/runs", handle([this](const Req&, const json&, Res&) {
            json out = json::array();
            for (const auto& id : engine().list_runs()) {
                const auto run = engine().load(id);
                out.push_back({{"run_id", id}, {"state", to_string(run.state)}, {"version", run.version},
                               {"scenario_id", run.scenario_id}, {"round", run.round}});
            }
            return json{{"runs", out}};
        }));

        server.Post("/runs", handle(
                                 [this](const Req&, const json& body, Res&) {
                                     CreateRunRequest r;
                                     r.scenario_id = body.at("scenario_id").get<int>();
                                     r.pool_size = body.value("pool_size", 6);
                                     if (body.contains("run_id")) r.run_id = body.at("run_id").get<std::string>();
                                     if (body.contains("user_prompt")) r.user_prompt = body.at("user_prompt").get<std::string>();
                                     if (body.contains("highlight_color")) {
                                         r.highlight_color = body.at("highlight_color").get<std::string>();
                                     }
                                     r.seed = body.value("seed", std::uint64_t{0});
                                     r.scene_id = body.value("scene_id", "");
                                     if (body.contains("scene_png_base64")) {
                                         r.scene_image = decode_image(base64_decode(body.at("scene_png_base64").get<std::string>()));
                                     } else if (body.contains("qc_item_id")) {
                                         const std::string item = body.at("qc_item_id").get<std::string>();
                                         const std::string scene = body.at("scene_id").get<std::string>();
                                         r.scene_image = deps.qc->scene_image(item, scene);
                                         r.location_id = deps.qc->item(item).location_id;
                                     } else if (body.contains("scene_path")) {
                                         r.scene_image = read_image(body.at("scene_path").get<std::string>());
                                     } else {
                                         throw PreconditionError("validation",
                                                                 "one of scene_png_base64, qc_item_id or scene_path is required");
                                     }
                                     return to_json(engine().create_run(r));
                                 },
                                 201));

        server.Get(R"(/runs/([A-Za-z0-9._-]+))", handle([this](const Req& req, const json&, Res&) {
            return to_json(engine().load(req.matches[1]));
        }));

        server.Post(R"(/runs/([A-Za-z0-9._-]+)/advance)", handle([this](const Req& req, const json& body, Res&) {
            const std::string id = req.matches[1];
            const auto version = expected_version(req, body);
            if (engine().load(id).state == RunState::errored) return to_json(engine().resume(id, version));
            return to_json(engine().step(id, version));
        }));

        server.Post(R"(/runs/([A-Za-z0-9._-]+)/checkpoints/([a-z]+))", handle([this](const Req& req, const json& body, Res&) {
            CheckpointInput in;
            in.stage = checkpoint_stage_from_string(std::string(req.matches[2]));
            in.decision = decision_from_string(body.value("decision", "approved"));
            in.editor = body.value("editor", "");
            in.expected_version = expected_version(req, body);
            if (body.contains("payload") && !body.at("payload").is_null()) {
                const std::string payload = body.at("payload").get<std::string>();
                if (in.stage == CheckpointStage::highlight) {
                    const auto bytes = base64_decode(payload);
                    in.payload = std::string(bytes.begin(), bytes.end());
                } else {
                    in.payload = payload;
                }
            }
            return to_json(engine().checkpoint(req.matches[1], in));
        }));

        server.Get(R"(/runs/([A-Za-z0-9._-]+)/candidates)", handle([this](const Req& req, const json&, Res&) {
            return with_urls(engine().candidates(req.matches[1]));
        }));

        server.Get(R"(/runs/([A-Za-z0-9._-]+)/blobs/([0-9a-f]{64}))", handle([this](const Req& req, const json&, Res& res) {
            const std::string id = req.matches[1];
            const std::string hash = req.matches[2];
            const PipelineRun run = engine().load(id);
            std::optional<std::string> path;
            for (const auto& [name, h] : run.artifacts) {
                if (h == hash) path = name;
            }
            for (const auto& s : run.stale) {
                if (!path && s.hash == hash) path = s.path;
            }
            if (!path) throw NotFoundError("run " + id + " has no blob " + hash);
            res.set_header("Cache-Control", "public, max-age=31536000, immutable");
            res.set_content(engine().store().read_blob(id, *path), content_type_for(*path));
            return json(nullptr);
        }));

        server.Post(R"(/runs/([A-Za-z0-9._-]+)/expert-pick)", handle([this](const Req& req, const json& body, Res&) {
            std::optional<std::string> pick;
            if (body.contains("candidate_id") && !body.at("candidate_id").is_null()) {
                pick = body.at("candidate_id").get<std::string>();
            }
            std::optional<ReviseTarget> target;
            if (body.contains("revise_target") && !body.at("revise_target").is_null()) {
                target = revise_target_from_string(body.at("revise_target").get<std::string>());
            }
            return to_json(engine().record_expert_pick(req.matches[1], pick, target, body.value("editor", ""),
                                                       expected_version(req, body)));
        }));

        server.Post("/ingest", handle([this](const Req&, const json& body, Res&) {
            if (!deps.imagery || !deps.qc) throw PreconditionError("validation", "ingestion is not configured");
            std::vector<ManifestEntry> entries;
            if (body.contains("manifest_csv")) {
                entries = parse_manifest(body.at("manifest_csv").get<std::string>());
            }
            for (const auto& l : body.value("locations", json::array())) {
                entries.push_back({l.at("location_id").get<std::string>(), l.at("lat").get<double>(),
                                   l.at("lon").get<double>(), l.value("context_tag", "")});
            }
            if (entries.empty()) throw PreconditionError("validation", "no locations to ingest");
            IngestOptions opt = deps.ingest_defaults;
            opt.headings = body.value("headings", opt.headings);
            opt.size = body.value("size", opt.size);
            opt.pitch = body.value("pitch", opt.pitch);
            opt.fov = body.value("fov", opt.fov);
            return ingest_locations(entries, opt, *deps.imagery, *deps.qc, deps.imagery_retry, *deps.sleeper).to_json();
        }));

        server.Get("/qc", handle([this](const Req& req, const json&, Res&) {
            if (!deps.qc) throw PreconditionError("validation", "QC store is not configured");
            const bool pending_only = req.get_param_value("pending") == "true";
            json items = json::array();
            for (const auto& item : deps.qc->items()) {
                if (pending_only && item.decided()) continue;
                items.push_back(to_json(item));
            }
            return json{{"items", items}};
        }));

        server.Post(R"(/qc/([A-Za-z0-9._-]+)/choice)", handle([this](const Req& req, const json& body, Res&) {
            if (!deps.qc) throw PreconditionError("validation", "QC store is not configured");
            return to_json(deps.qc->record_choice(req.matches[1], body.at("scene_id").get<std::string>(),
                                                  body.value("reviewer", "")));
        }));

        server.Get("/reports/accuracy", handle([this](const Req& req, const json&, Res& res) {
            if (!req.has_param("labels")) throw PreconditionError("validation", "labels query parameter is required");
            const auto labels = read_gold_labels(req.get_param_value("labels"));
            const auto table = evaluator_accuracy(labels, agent_picks(engine().store()));
            if (req.get_param_value("format") == "text") {
                res.set_content(table.to_text(), "text/plain; charset=utf-8");
                return json(nullptr);
            }
            return table.to_json();
        }));
    }
};

Service::Service(ServiceDeps deps) : impl_(std::make_unique<Impl>(std::move(deps))) {
    if (!impl_->deps.engine) throw PreconditionError("validation", "service requires an engine");
    if (!impl_->deps.sleeper) impl_->deps.sleeper = std::make_shared<RealSleeper>();
}

Service::~Service() { stop(); }

int Service::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound <= 0) throw Error("bind_failure", "cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void Service::listen(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) {
        throw Error("bind_failure", "cannot serve on " + host + ":" + std::to_string(port));
    }
}

void Service::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace bikeflow

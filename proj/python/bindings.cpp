#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bikeflow/config.hpp"
#include "bikeflow/domain.hpp"
#include "bikeflow/evaluator.hpp"
#include "bikeflow/lane_sketch.hpp"
#include "bikeflow/metrics.hpp"
#include "bikeflow/mock_provider.hpp"
#include "bikeflow/orchestrator.hpp"
#include "bikeflow/raster.hpp"
#include "bikeflow/templates.hpp"

namespace py = pybind11;
using namespace bikeflow;

namespace {

std::string run_mock(const std::filesystem::path& scene, int scenario_id, int pool_size,
                     const std::filesystem::path& runs_dir, std::uint64_t seed, std::optional<std::string> run_id) {
    AppConfig c = default_config();
    c.engine.runs_dir = runs_dir;
    c.providers.seed = seed;
    Engine engine(c.engine, build_providers(c.providers, std::make_shared<VirtualSleeper>()), TemplateLibrary::builtin());
    CreateRunRequest req;
    req.scene_image = read_image(scene);
    req.scene_id = scene.stem().string();
    req.scenario_id = scenario_id;
    req.pool_size = pool_size;
    req.seed = seed;
    req.run_id = std::move(run_id);
    const PipelineRun created = engine.create_run(req);
    return to_json(engine.run_to_completion(created.run_id)).dump();
}

std::string load_run(const std::filesystem::path& runs_dir, const std::string& run_id) {
    return to_json(RunStore(runs_dir).load(run_id)).dump();
}

std::optional<std::string> next_state(const std::string& state, const std::string& event,
                                      std::optional<std::string> target, int round, int max_rounds) {
    std::optional<ReviseTarget> t;
    if (target) t = revise_target_from_string(*target);
    const auto s = transition(run_state_from_string(state), event_kind_from_string(event), t, round, max_rounds,
                              std::nullopt);
    if (!s) return std::nullopt;
    return std::string(to_string(*s));
}

std::string accuracy_table(const std::string& labels_csv, const std::map<std::string, std::string>& picks) {
    return evaluator_accuracy(parse_gold_labels(labels_csv), picks).to_json().dump();
}

std::string render_template(const std::string& name, const std::map<std::string, std::string>& vars) {
    const TemplateLibrary& lib = TemplateLibrary::builtin();
    const PromptTemplate* t = nullptr;
    if (name == "locator") t = &lib.locator;
    else if (name == "optimizer") t = &lib.optimizer;
    else if (name == "highlight") t = &lib.highlight;
    else if (name == "compliance") t = &lib.compliance;
    else throw PreconditionError("validation", "unknown template: " + name);
    const TemplateVars tv(vars.begin(), vars.end());
    return t->render(tv).combined();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bike-lane design pipeline engine";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    m.def("catalog_json", [] { return catalog_to_json(scenario_catalog()).dump(); },
          "Design scenario catalog as JSON text.");
    m.def("boundary_clause", [](const std::string& kind, const std::string& side) {
        return render_boundary_clause(BoundarySpec::of(boundary_kind_from_string(kind)),
                                      side == "left" ? Side::left : Side::right);
    }, py::arg("kind"), py::arg("side"));
    m.def("cosine_similarity", [](std::vector<double> a, std::vector<double> b) {
        return cosine_similarity(EmbeddingVector{std::move(a)}, EmbeddingVector{std::move(b)});
    }, py::arg("a"), py::arg("b"));
    m.def("histogram_embedding", [](const std::filesystem::path& image) {
        return byte_histogram(read_image(image)).values;
    }, py::arg("image"));
    m.def("format_percent", &format_percent, py::arg("matches"), py::arg("cases"));
    m.def("accuracy_table", &accuracy_table, py::arg("labels_csv"), py::arg("picks"));
    m.def("composite_fidelity", [](int plausibility, int integration, int preservation) {
        FidelityScore s;
        s.lane_plausibility = plausibility;
        s.scene_integration = integration;
        s.background_preservation = preservation;
        return composite_fidelity(s);
    }, py::arg("plausibility"), py::arg("integration"), py::arg("preservation"));
    m.def("accept_case", [](int plausibility, int integration, int preservation, bool background_change,
                            const std::map<std::string, bool>& hard, const std::map<std::string, bool>& soft) {
        FidelityScore s;
        s.lane_plausibility = plausibility;
        s.scene_integration = integration;
        s.background_preservation = preservation;
        s.background_change_flag = background_change;
        ComplianceRecord c;
        c.hard = hard;
        c.soft = soft;
        return accept_case(s, c);
    }, py::arg("plausibility"), py::arg("integration"), py::arg("preservation"),
       py::arg("background_change") = false, py::arg("hard") = std::map<std::string, bool>{},
       py::arg("soft") = std::map<std::string, bool>{});
    m.def("next_state", &next_state, py::arg("state"), py::arg("event"), py::arg("target") = std::nullopt,
          py::arg("round") = 1, py::arg("max_rounds") = kDefaultMaxRounds);
    m.def("render_template", &render_template, py::arg("name"), py::arg("vars"));
    m.def("run_mock", &run_mock, py::arg("scene"), py::arg("scenario_id"), py::arg("pool_size"),
          py::arg("runs_dir"), py::arg("seed") = 0, py::arg("run_id") = std::nullopt,
          py::call_guard<py::gil_scoped_release>());
    m.def("load_run", &load_run, py::arg("runs_dir"), py::arg("run_id"));
    m.def("write_reference", [](int scenario_id, const std::filesystem::path& out, int size) {
        write_png(out, reference_design_image(scenario_by_id(scenario_id), size));
    }, py::arg("scenario_id"), py::arg("out"), py::arg("size") = 256);
}

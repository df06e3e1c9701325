#include <gtest/gtest.h>

#include <fstream>

#include "bikeflow/config.hpp"
#include "bikeflow/errors.hpp"
#include "support.hpp"

using namespace bikeflow;
using namespace bikeflow::testkit;
using nlohmann::json;

TEST(Config, Defaults) {
    const auto c = config_from_json(json::object());
    EXPECT_EQ(c.providers.mode, ProviderMode::mock);
    EXPECT_EQ(c.engine.checkpoint_mode, CheckpointMode::auto_approve);
    EXPECT_EQ(c.engine.evaluator.max_rounds, kDefaultMaxRounds);
    EXPECT_EQ(c.engine.evaluator.advance_count, kAdvanceCount);
    EXPECT_EQ(c.imagery.options.pitch, kDefaultPitch);
    EXPECT_EQ(c.imagery.options.fov, kDefaultFov);
    EXPECT_EQ(c.service.port, 8080);
    EXPECT_TRUE(c.service.token_ref.empty());
    for (const char* role : kProviderRoles) EXPECT_TRUE(c.providers.roles.count(role)) << role;
}

TEST(Config, UnknownKeysRejectedAnnotationsAllowed) {
    EXPECT_THROW((void)config_from_json({{"max_round", 2}}), PreconditionError);
    EXPECT_THROW((void)config_from_json({{"providers", {{"moed", "mock"}}}}), PreconditionError);
    EXPECT_THROW((void)config_from_json({{"service", {{"prot", 1}}}}), PreconditionError);
    EXPECT_NO_THROW((void)config_from_json({{"_comment", "x"}, {"providers", {{"_note", "y"}}}}));
}

TEST(Config, ValidationErrors) {
    const json bad[] = {
        {{"checkpoint_mode", "sometimes"}},
        {{"second_step_input", "both"}},
        {{"verdict_parsing", "loose"}},
        {{"max_rounds", 0}},
        {{"advance_count", 0}},
        {{"mask_fill", {0, 0}}},
        {{"mask_fill", {0, 0, 300}}},
        {{"providers", {{"mode", "live"}}}},
        {{"providers", {{"concurrency", 0}}}},
        {{"providers", {{"max_retries", -1}}}},
        {{"imagery", {{"source", "satellite"}}}},
        {{"service", {{"port", 70000}}}},
    };
    for (const auto& j : bad) EXPECT_THROW((void)config_from_json(j), PreconditionError) << j.dump();
}

TEST(Config, LoadsFileWithComments) {
    TempDir tmp;
    const auto path = tmp / "c.json";
    std::ofstream(path) << "{\n  // comment\n  \"checkpoint_mode\": \"require_human\",\n"
                           "  \"providers\": {\"mode\": \"replay\", \"seed\": 9, \"judge\": {\"model\": \"o3\"}}\n}\n";
    const auto c = load_config(path);
    EXPECT_EQ(c.engine.checkpoint_mode, CheckpointMode::require_human);
    EXPECT_EQ(c.providers.mode, ProviderMode::replay);
    EXPECT_EQ(c.providers.seed, 9u);
    EXPECT_EQ(c.providers.roles.at("judge").model, "o3");
    std::ofstream(tmp / "bad.json") << "{ not json";
    EXPECT_THROW((void)load_config(tmp / "bad.json"), PreconditionError);
}

TEST(Config, ShippedDefaultParses) {
    const auto c = load_config(std::filesystem::path(BIKEFLOW_SOURCE_DIR) / "config" / "default.json");
    EXPECT_EQ(c.providers.mode, ProviderMode::mock);
    EXPECT_FALSE(c.providers.roles.at("editor").model.empty());
}

TEST(Config, ModeRoundTrip) {
    for (auto m : {ProviderMode::mock, ProviderMode::http, ProviderMode::record, ProviderMode::replay}) {
        EXPECT_EQ(provider_mode_from_string(to_string(m)), m);
    }
}

TEST(Config, MockProvidersRunEndToEnd) {
    TempDir tmp;
    auto c = default_config();
    c.engine.runs_dir = tmp / "runs";
    auto providers = build_providers(c.providers, std::make_shared<VirtualSleeper>());
    Engine engine(c.engine, providers, load_templates(c), std::make_shared<FixedClock>());
    const auto run = engine.create_run(scene_request(1));
    EXPECT_EQ(engine.run_to_completion(run.run_id).state, RunState::finalized);
    c.imagery.source = "synthetic";
    EXPECT_NE(dynamic_cast<SyntheticImagerySource*>(build_imagery(c.imagery, 0).get()), nullptr);
}

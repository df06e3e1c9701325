#include <gtest/gtest.h>

#include "bikeflow/fixtures.hpp"
#include "support.hpp"

using namespace bikeflow;
using namespace bikeflow::testkit;

TEST(Fixtures, RequestHashIsCanonical) {
    const auto a = nlohmann::json::parse(R"({"b":1,"a":{"y":2,"x":3}})");
    const auto b = nlohmann::json::parse(R"({"a":{"x":3,"y":2},"b":1})");
    EXPECT_EQ(FixtureStore::request_hash(a), FixtureStore::request_hash(b));
    EXPECT_NE(FixtureStore::request_hash(a), FixtureStore::request_hash(nlohmann::json{{"b", 2}}));
}

TEST(Fixtures, RecordThenReplayWithoutInner) {
    TempDir tmp;
    auto store = std::make_shared<FixtureStore>(tmp / "fx");
    const auto live = mock_set(default_mock_script(3));
    const auto recorder = record_providers(live, store);
    const Image img = synthetic_street(64, 2);

    const auto edited = recorder.editor->edit_image(img, "paint", 2, {1});
    const auto text = recorder.locator->describe(img, "sys", "user");
    const auto verdict = recorder.judge->judge(img, "ok?");
    const auto emb = recorder.embedder->embed(img);
    const auto mask = recorder.segmenter->segment(img);

    const auto replayed = replay_providers(store);
    EXPECT_EQ(replayed.editor->edit_image(img, "paint", 2, {1}), edited);
    EXPECT_EQ(replayed.locator->describe(img, "sys", "user"), text);
    EXPECT_EQ(replayed.judge->judge(img, "ok?"), verdict);
    EXPECT_EQ(replayed.embedder->embed(img), emb);
    EXPECT_EQ(replayed.segmenter->segment(img), mask);
    EXPECT_TRUE(std::filesystem::exists(store->path_for("editor", fixture_request::edit(img, "paint", 2, {1}))));
}

TEST(Fixtures, MissIsReported) {
    TempDir tmp;
    const auto replayed = replay_providers(std::make_shared<FixtureStore>(tmp / "empty"));
    try {
        (void)replayed.judge->judge(Image(2, 2), "never recorded");
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_EQ(e.kind(), ProviderErrorKind::fixture_miss);
        EXPECT_FALSE(e.retryable());
    }
}

TEST(Fixtures, ReplayedEngineRunMatchesLiveRun) {
    TempDir tmp;
    auto store = std::make_shared<FixtureStore>(tmp / "fx");
    auto live = make_engine(tmp / "live", record_providers(mock_set(default_mock_script(0)), store));
    const auto a = live->run_to_completion(live->create_run(scene_request(2)).run_id);
    auto offline = make_engine(tmp / "replay", replay_providers(store));
    const auto b = offline->run_to_completion(offline->create_run(scene_request(2)).run_id);
    EXPECT_EQ(a.state, RunState::finalized);
    EXPECT_EQ(b.state, a.state);
    EXPECT_EQ(b.artifacts, a.artifacts);
    EXPECT_EQ(b.agent_selection, a.agent_selection);
}

#include <gtest/gtest.h>

#include "bikeflow/agents.hpp"
#include "bikeflow/lane_sketch.hpp"
#include "support.hpp"

using namespace bikeflow;
using namespace bikeflow::testkit;

namespace {

const std::vector<std::string> kAbsence{"no bike lane", "not present"};

class SlotFailingEditor final : public ImageEditor {
  public:
    explicit SlotFailingEditor(int bad_slot) : bad_slot_(bad_slot) {}
    std::vector<Image> edit_image(const Image& image, const std::string&, int n, const EditOptions& o) override {
        if (o.slot == bad_slot_) throw ProviderError(ProviderErrorKind::unavailable, "slot down");
        return std::vector<Image>(static_cast<std::size_t>(n), image);
    }

  private:
    int bad_slot_;
};

StreetScene local_scene() {
    StreetScene s;
    s.scene_id = "s1";
    s.image = synthetic_street(256, 1);
    return s;
}

}  // namespace

TEST(Locator, AbsencePhraseExcludes) {
    const auto lane = parse_locator_response("There is NO bike lane visible here.", kAbsence);
    EXPECT_FALSE(lane.present);
    EXPECT_FALSE(parse_locator_response("   ", kAbsence).present);
}

TEST(Locator, LabeledLines) {
    const auto lane = parse_locator_response(
        "**Markings**: two solid white lines\nPattern: 3 ft painted buffer\nWidth: about 5 ft\nPosition: right of traffic",
        kAbsence);
    EXPECT_TRUE(lane.present);
    EXPECT_EQ(lane.markings, "two solid white lines");
    EXPECT_EQ(lane.pattern, "3 ft painted buffer");
    EXPECT_EQ(lane.width_estimate, "about 5 ft");
    EXPECT_EQ(lane.relative_position, "right of traffic");
    EXPECT_FALSE(lane.parse_warning);
}

TEST(Locator, FreeProseUsesKeywords) {
    const auto lane = parse_locator_response(
        "The lane runs along the right side of the road. It is roughly five feet wide. A solid white line marks it.",
        kAbsence);
    EXPECT_TRUE(lane.present);
    EXPECT_NE(lane.relative_position.find("right side"), std::string::npos);
    EXPECT_NE(lane.width_estimate.find("five feet"), std::string::npos);
    EXPECT_NE(lane.markings.find("white line"), std::string::npos);
}

TEST(Locator, UnstructuredProseWarns) {
    const auto lane = parse_locator_response("Something is there.", kAbsence);
    EXPECT_TRUE(lane.present);
    EXPECT_TRUE(lane.parse_warning);
}

TEST(Agents, OptimizerUsesScenarioClauses) {
    DesignAgents agents(mock_set(default_mock_script(0)), TemplateLibrary::builtin());
    const auto& ds = scenario_by_id(6);
    const auto p = agents.optimize_prompt("Redesign the bike lane.", ds);
    EXPECT_EQ(p.scenario_id, 6);
    EXPECT_NE(p.text.find("3 ft white-painted buffer"), std::string::npos);
    EXPECT_EQ(p.word_count, count_words(p.text));
    EXPECT_THROW((void)agents.optimize_prompt("   ", ds), PreconditionError);
}

TEST(Agents, GenerationPromptEndsWithHighlightStatement) {
    const auto p = OptimizedPrompt::make("Paint it.", 1, "u", "ex");
    LaneDescription lane;
    lane.present = true;
    lane.raw_text = "A lane.";
    const auto text = compose_generation_prompt(p, lane);
    EXPECT_TRUE(text.ends_with(kHighlightStatement));
    lane.present = false;
    EXPECT_THROW((void)compose_generation_prompt(p, lane), PreconditionError);
}

TEST(Agents, HighlightAndPoolCascade) {
    DesignAgents agents(mock_set(default_mock_script(0)), TemplateLibrary::builtin());
    const auto scene = local_scene();
    const auto lane = agents.locate_lane(scene);
    ASSERT_TRUE(lane.present);
    EXPECT_NE(agents.highlight_prompt(lane, "green").find("into a green-painted lane"), std::string::npos);
    const auto hl = agents.generate_highlight(scene, lane, "green", "run-x", "r1-h");
    EXPECT_EQ(hl.stage, CandidateStage::highlight);
    EXPECT_EQ(hl.image.width(), scene.image.width());
    const auto pool = agents.generate_candidates(hl, "prompt", 7, "r1-");
    ASSERT_EQ(pool.size(), 7u);
    EXPECT_EQ(pool.front().candidate_id, "r1-c01");
    EXPECT_EQ(pool.back().candidate_id, "r1-c07");
    for (const auto& c : pool) {
        EXPECT_EQ(c.parent_id, "r1-h");
        EXPECT_EQ(c.prompt_hash, sha256_hex("prompt"));
        EXPECT_TRUE(satisfies_invariants(c));
    }
    EXPECT_THROW((void)agents.generate_candidates(hl, "prompt", 4, "r1-"), PreconditionError);
    EXPECT_THROW((void)agents.generate_candidates(hl, "prompt", 11, "r1-"), PreconditionError);
}

TEST(Agents, PoolIsDeterministicAcrossParallelism) {
    AgentConfig serial;
    serial.parallel_generation = false;
    DesignAgents a(mock_set(default_mock_script(5)), TemplateLibrary::builtin());
    DesignAgents b(mock_set(default_mock_script(5)), TemplateLibrary::builtin(), serial);
    const auto scene = local_scene();
    const auto lane = a.locate_lane(scene);
    const auto hl = a.generate_highlight(scene, lane, "green", "r", "h");
    const auto pa = a.generate_candidates(hl, "p", 6, "r1-");
    const auto pb = b.generate_candidates(hl, "p", 6, "r1-");
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].image, pb[i].image);
}

TEST(Agents, PartialPoolKeepsCompletedSlots) {
    ProviderSet set = mock_set(default_mock_script(0));
    set.editor = std::make_shared<SlotFailingEditor>(2);
    DesignAgents agents(set, TemplateLibrary::builtin());
    CandidateDesign hl;
    hl.stage = CandidateStage::highlight;
    hl.candidate_id = "h";
    hl.image = Image(8, 8);
    try {
        (void)agents.generate_candidates(hl, "p", 5, "r1-");
        FAIL() << "expected PartialPoolError";
    } catch (const PartialPoolError& e) {
        EXPECT_EQ(e.completed().size(), 4u);
        EXPECT_NE(std::string(e.what()).find("slot 3"), std::string::npos);
    }
}

TEST(Agents, ExcludedSceneCannotBeHighlighted) {
    DesignAgents agents(mock_set(default_mock_script(0)), TemplateLibrary::builtin());
    LaneDescription absent;
    EXPECT_THROW((void)agents.generate_highlight(local_scene(), absent, "green", "r", "h"), PreconditionError);
}

#include <gtest/gtest.h>

#include <random>

#include "bikeflow/evaluator.hpp"
#include "support.hpp"

using namespace bikeflow;
using namespace bikeflow::testkit;

namespace {

RankedPool pool_of(std::vector<std::pair<std::string, std::optional<double>>> entries) {
    RankedPool p;
    for (auto& [id, s] : entries) {
        RankedEntry e;
        e.candidate_id = id;
        e.similarity = s;
        p.entries.push_back(e);
    }
    sort_entries(p.entries);
    return p;
}

}  // namespace

TEST(Cosine, ClosedFormValue) {
    EXPECT_NEAR(cosine_similarity({{1, 2, 2}}, {{2, 1, 2}}), 8.0 / 9.0, 1e-12);
    EXPECT_NEAR(cosine_similarity({{1, 0}}, {{-1, 0}}), -1.0, 1e-12);
    EXPECT_NEAR(cosine_similarity({{1, 0}}, {{0, 3}}), 0.0, 1e-12);
}

TEST(Cosine, Errors) {
    try {
        (void)cosine_similarity({{0, 0}}, {{1, 1}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "degenerate_embedding");
    }
    EXPECT_THROW((void)cosine_similarity({{1}}, {{1, 1}}), PreconditionError);
}

TEST(Mask, CheckerboardFill) {
    Image img(4, 3, {10, 20, 30});
    Mask m(4, 3);
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 4; ++x) m.set(x, y, (x + y) % 2 == 0);
    }
    const Image out = apply_mask(img, m, {1, 2, 3});
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 4; ++x) {
            const Rgb want = (x + y) % 2 == 0 ? Rgb{10, 20, 30} : Rgb{1, 2, 3};
            EXPECT_EQ(out.at(x, y), want) << x << "," << y;
        }
    }
    EXPECT_THROW((void)apply_mask(img, Mask(3, 3), {}), PreconditionError);
}

TEST(Rank, TieBreakAndUnscoredLast) {
    const auto p = pool_of({{"c3", 0.5}, {"c2", std::nullopt}, {"c1", 0.5}, {"c4", 0.9}, {"c0", std::nullopt}});
    std::vector<std::string> ids;
    for (const auto& e : p.entries) ids.push_back(e.candidate_id);
    EXPECT_EQ(ids, (std::vector<std::string>{"c4", "c1", "c3", "c0", "c2"}));
    EXPECT_EQ(top_k(p, 3), (std::vector<std::string>{"c4", "c1", "c3"}));
    EXPECT_EQ(top_k(pool_of({{"a", 0.1}, {"b", std::nullopt}}), 3), (std::vector<std::string>{"a"}));
    EXPECT_THROW((void)top_k(p, 0), PreconditionError);
}

TEST(Verdict, StrictAndLenient) {
    EXPECT_EQ(parse_verdict("yes", VerdictParsing::strict).verdict, Verdict::yes);
    EXPECT_FALSE(parse_verdict("Yes.", VerdictParsing::strict).verdict);
    const auto lenient = parse_verdict(" Yes.\n", VerdictParsing::lenient);
    EXPECT_EQ(lenient.verdict, Verdict::yes);
    EXPECT_TRUE(lenient.flagged);
    EXPECT_EQ(parse_verdict("NO", VerdictParsing::lenient).verdict, Verdict::no);
    EXPECT_FALSE(parse_verdict("maybe", VerdictParsing::lenient).verdict);
}

TEST(Select, HighestSimilarityYesWins) {
    const auto p = pool_of({{"a", 0.9}, {"b", 0.8}, {"c", 0.7}, {"d", 0.6}});
    auto out = select_final(p, {{"a", Verdict::no}, {"b", Verdict::yes}, {"c", Verdict::yes}});
    EXPECT_EQ(out.selected, "b");
    EXPECT_EQ(out.disposition, Disposition::selected);
    out = select_final(p, {{"a", Verdict::no}, {"b", Verdict::no}, {"c", Verdict::no}}, 1, 3);
    EXPECT_EQ(out.disposition, Disposition::regenerate);
    EXPECT_FALSE(out.selected);
    out = select_final(p, {{"a", Verdict::no}, {"b", Verdict::no}, {"c", Verdict::no}}, 3, 3);
    EXPECT_EQ(out.disposition, Disposition::exhausted);
}

TEST(Evaluator, EvaluateJudgesOnlyAdvanced) {
    auto judge = std::make_shared<CountingJudge>(std::make_shared<MockProvider>(default_mock_script(0)));
    auto embedder = std::make_shared<KeyedEmbedder>();
    ProviderSet set = mock_set(default_mock_script(0));
    set.judge = judge;
    set.embedder = embedder;
    set.segmenter = std::make_shared<FullMaskSegmenter>();
    Evaluator ev(set, TemplateLibrary::builtin());

    std::mt19937_64 rng(1);
    const Image ref = random_image(4, 4, rng);
    embedder->set(ref, {{1, 0, 0}});
    std::vector<CandidateDesign> cands;
    const double xs[] = {0.1, 0.9, 0.5, 0.3, 0.7, 0.2};
    for (int i = 0; i < 6; ++i) {
        CandidateDesign c;
        c.candidate_id = "r1-c0" + std::to_string(i + 1);
        c.run_id = "r";
        c.image = random_image(4, 4, rng);
        embedder->set(c.image, {{xs[i], 1.0, 0}});
        cands.push_back(c);
    }
    const auto report = ev.evaluate(cands, ev.mask_reference(ref, "ref"), scenario_by_id(1), 1);
    EXPECT_EQ(report.advanced, (std::vector<std::string>{"r1-c02", "r1-c05", "r1-c03"}));
    EXPECT_EQ(judge->judged().size(), 3u);
    EXPECT_EQ(report.compliance.size(), 3u);
    EXPECT_EQ(report.outcome.selected, "r1-c02");
    for (const auto& c : cands) EXPECT_TRUE(satisfies_invariants(c));
    const auto round_trip = evaluation_report_from_json(to_json(report));
    EXPECT_EQ(round_trip.advanced, report.advanced);
    EXPECT_EQ(round_trip.outcome.selected, report.outcome.selected);
}

TEST(Evaluator, UnparseableVerdictRetriedThenNo) {
    MockScript s = default_mock_script(0);
    s.judge_fallback = "I think it looks fine";
    ProviderSet set = mock_set(s);
    Evaluator ev(set, TemplateLibrary::builtin());
    CandidateDesign c;
    c.candidate_id = "x";
    c.run_id = "r";
    c.image = Image(4, 4, {1, 1, 1});
    RankedPool p;
    RankedEntry e;
    e.candidate_id = "x";
    e.similarity = 0.5;
    p.entries.push_back(e);
    const auto r = ev.check_compliance(c, scenario_by_id(2), p);
    EXPECT_EQ(r.verdict, Verdict::no);
    EXPECT_TRUE(r.parse_flag);
    EXPECT_EQ(r.raw_responses.size(), 2u);
    CandidateDesign other = c;
    other.candidate_id = "y";
    EXPECT_THROW((void)ev.check_compliance(other, scenario_by_id(2), p), PreconditionError);
}

TEST(Evaluator, CompliancePromptListsBothBoundaries) {
    Evaluator ev(mock_set(default_mock_script(0)), TemplateLibrary::builtin());
    const auto prompt = ev.compliance_prompt(scenario_by_id(7));
    EXPECT_NE(prompt.find("bollard"), std::string::npos);
    EXPECT_TRUE(placeholders_in(prompt).empty());
}

TEST(Evaluator, MockHistogramIsNormalized) {
    const auto v = byte_histogram(Image(2, 2, {0, 128, 255}));
    ASSERT_EQ(v.dimension(), kMockEmbeddingDim);
    double sum = 0;
    for (double x : v.values) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_NEAR(v.values[0], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(v.values[4], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(v.values[7], 1.0 / 3.0, 1e-12);
}

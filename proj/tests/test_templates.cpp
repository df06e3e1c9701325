#include <gtest/gtest.h>

#include "bikeflow/templates.hpp"

using namespace bikeflow;

TEST(Templates, PlaceholdersInOrderOfAppearance) {
    EXPECT_EQ(placeholders_in("{B} then {A} then {B} and {lower} {NOT-ONE}"), (std::vector<std::string>{"B", "A"}));
}

TEST(Templates, SinglePassSubstitution) {
    EXPECT_EQ(render_text("x={X}", {{"X", "{Y}"}, {"Y", "boom"}}), "x={Y}");
    EXPECT_THROW((void)render_text("{MISSING}", {}), TemplateError);
}

TEST(Templates, ParseSystemAndUserSections) {
    const auto t = PromptTemplate::parse("t", "[system]\nYou are {ROLE}.\n[user]\nDo {TASK}.\n");
    EXPECT_EQ(t.placeholders(), (std::vector<std::string>{"ROLE", "TASK"}));
    const auto r = t.render({{"ROLE", "a judge"}, {"TASK", "it"}});
    EXPECT_EQ(r.system, "You are a judge.");
    EXPECT_EQ(r.user, "Do it.");
    EXPECT_FALSE(t.hash.empty());
    EXPECT_THROW((void)PromptTemplate::parse("bad", "no sections here"), TemplateError);
}

TEST(Templates, ExemplarFormatting) {
    const auto ex = ExemplarSet::parse("ex", "first\n---\nsecond\n");
    ASSERT_EQ(ex.examples.size(), 2u);
    EXPECT_EQ(ex.format(), "##Example 1##\nfirst\n\n##Example 2##\nsecond");
}

TEST(Templates, BuiltinMatchesShippedDirectory) {
    const auto dir = TemplateLibrary::from_directory(std::filesystem::path(BIKEFLOW_SOURCE_DIR) / "templates");
    EXPECT_EQ(dir.hashes(), TemplateLibrary::builtin().hashes());
    EXPECT_EQ(TemplateLibrary::builtin().exemplars.examples.size() >= 1, true);
}

TEST(Templates, HighlightTemplateNeedsColor) {
    const auto& lib = TemplateLibrary::builtin();
    const auto names = lib.highlight.placeholders();
    EXPECT_NE(std::find(names.begin(), names.end(), "COLOR"), names.end());
}

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bikeflow/errors.hpp"

namespace bikeflow {

class TemplateError : public Error {
  public:
    explicit TemplateError(const std::string& message) : Error("template", message) {}
};

using TemplateVars = std::map<std::string, std::string, std::less<>>;

/// Placeholder names (`{NAME}`, upper-case letters and underscores) in
/// order of first appearance.
[[nodiscard]] std::vector<std::string> placeholders_in(std::string_view text);

/// Single-pass substitution: substituted values are never re-scanned. Any
/// placeholder without a value is a TemplateError.
[[nodiscard]] std::string render_text(std::string_view text, const TemplateVars& vars);

struct RenderedPrompt {
    std::string system;
    std::string user;

    /// System and user text in one block, for single-prompt backends.
    [[nodiscard]] std::string combined() const;
};

struct PromptTemplate {
    std::string template_id;
    std::string system_text;
    std::string user_text;
    std::string hash;  // SHA-256 of the asset text, recorded in run provenance

    /// Parses the `[system]` / `[user]` asset format.
    [[nodiscard]] static PromptTemplate parse(std::string template_id, std::string_view asset_text);

    [[nodiscard]] std::vector<std::string> placeholders() const;
    [[nodiscard]] RenderedPrompt render(const TemplateVars& vars) const;
};

struct ExemplarSet {
    std::string exemplar_set_id;
    std::vector<std::string> examples;

    /// Blocks separated by a line holding only `---`.
    [[nodiscard]] static ExemplarSet parse(std::string id, std::string_view asset_text);
    /// "##Example 1##\n..." blocks joined by blank lines.
    [[nodiscard]] std::string format() const;
};

struct TemplateLibrary {
    PromptTemplate locator;
    PromptTemplate optimizer;
    PromptTemplate highlight;
    PromptTemplate compliance;
    ExemplarSet exemplars;

    /// The assets compiled into the library.
    [[nodiscard]] static const TemplateLibrary& builtin();
    /// Same file names as the shipped `templates/` directory.
    [[nodiscard]] static TemplateLibrary from_directory(const std::filesystem::path& dir);

    [[nodiscard]] std::map<std::string, std::string> hashes() const;
};

/// Raw text of a compiled-in asset, e.g. "templates/locator.txt".
[[nodiscard]] std::string_view builtin_asset(std::string_view name);

}  // namespace bikeflow

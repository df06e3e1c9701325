#include "bikeflow/templates.hpp"

#include <algorithm>

#include "bikeflow/digest.hpp"

namespace bikeflow {

// Generated at build time from the files under templates/.
std::string_view embedded_asset(std::string_view name);

namespace {

bool is_name_char(char c) { return (c >= 'A' && c <= 'Z') || c == '_'; }

// Length of a placeholder starting at text[i] == '{', or 0.
std::size_t placeholder_len(std::string_view text, std::size_t i) {
    std::size_t j = i + 1;
    while (j < text.size() && is_name_char(text[j])) ++j;
    if (j == i + 1 || j >= text.size() || text[j] != '}') return 0;
    return j - i + 1;
}

std::string trim_newlines(std::string_view s) {
    while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

}  // namespace

std::vector<std::string> placeholders_in(std::string_view text) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        if (const auto len = placeholder_len(text, i)) {
            std::string name(text.substr(i + 1, len - 2));
            if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
            i += len - 1;
        }
    }
    return out;
}

std::string render_text(std::string_view text, const TemplateVars& vars) {
    std::vector<std::string> missing;
    for (const auto& name : placeholders_in(text)) {
        if (vars.find(name) == vars.end()) missing.push_back(name);
    }
    if (!missing.empty()) {
        std::string msg = "unresolved placeholder(s):";
        for (const auto& m : missing) msg += " {" + m + "}";
        throw TemplateError(msg);
    }
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '{') {
            if (const auto len = placeholder_len(text, i)) {
                out += vars.find(text.substr(i + 1, len - 2))->second;
                i += len - 1;
                continue;
            }
        }
        out.push_back(text[i]);
    }
    return out;
}

std::string RenderedPrompt::combined() const { return system.empty() ? user : system + "\n\n" + user; }

PromptTemplate PromptTemplate::parse(std::string template_id, std::string_view asset_text) {
    constexpr std::string_view sys_tag = "[system]\n";
    constexpr std::string_view user_tag = "[user]\n";
    const auto s = asset_text.find(sys_tag);
    const auto u = asset_text.find(user_tag);
    if (s == std::string_view::npos || u == std::string_view::npos || u < s) {
        throw TemplateError("template " + template_id + " lacks [system]/[user] sections");
    }
    PromptTemplate t;
    t.template_id = std::move(template_id);
    t.system_text = trim_newlines(asset_text.substr(s + sys_tag.size(), u - s - sys_tag.size()));
    t.user_text = trim_newlines(asset_text.substr(u + user_tag.size()));
    t.hash = sha256_hex(asset_text);
    return t;
}

std::vector<std::string> PromptTemplate::placeholders() const {
    auto out = placeholders_in(system_text);
    for (auto& p : placeholders_in(user_text)) {
        if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(std::move(p));
    }
    return out;
}

RenderedPrompt PromptTemplate::render(const TemplateVars& vars) const {
    try {
        return {render_text(system_text, vars), render_text(user_text, vars)};
    } catch (const TemplateError& e) {
        throw TemplateError(template_id + ": " + e.what());
    }
}

ExemplarSet ExemplarSet::parse(std::string id, std::string_view asset_text) {
    ExemplarSet set;
    set.exemplar_set_id = std::move(id);
    std::string current;
    std::size_t pos = 0;
    while (pos <= asset_text.size()) {
        auto nl = asset_text.find('\n', pos);
        if (nl == std::string_view::npos) nl = asset_text.size();
        const auto line = asset_text.substr(pos, nl - pos);
        if (line == "---") {
            set.examples.push_back(trim_newlines(current));
            current.clear();
        } else {
            current.append(line);
            current.push_back('\n');
        }
        pos = nl + 1;
    }
    if (auto last = trim_newlines(current); !last.empty()) set.examples.push_back(std::move(last));
    return set;
}

std::string ExemplarSet::format() const {
    std::string out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += "##Example " + std::to_string(i + 1) + "##\n" + examples[i];
    }
    return out;
}

std::string_view builtin_asset(std::string_view name) { return embedded_asset(name); }

const TemplateLibrary& TemplateLibrary::builtin() {
    static const TemplateLibrary lib{
        PromptTemplate::parse("locator", builtin_asset("templates/locator.txt")),
        PromptTemplate::parse("optimizer", builtin_asset("templates/optimizer.txt")),
        PromptTemplate::parse("highlight", builtin_asset("templates/highlight.txt")),
        PromptTemplate::parse("compliance", builtin_asset("templates/compliance.txt")),
        ExemplarSet::parse("default", builtin_asset("templates/exemplars_default.txt")),
    };
    return lib;
}

TemplateLibrary TemplateLibrary::from_directory(const std::filesystem::path& dir) {
    return {
        PromptTemplate::parse("locator", read_file_text(dir / "locator.txt")),
        PromptTemplate::parse("optimizer", read_file_text(dir / "optimizer.txt")),
        PromptTemplate::parse("highlight", read_file_text(dir / "highlight.txt")),
        PromptTemplate::parse("compliance", read_file_text(dir / "compliance.txt")),
        ExemplarSet::parse("default", read_file_text(dir / "exemplars_default.txt")),
    };
}

std::map<std::string, std::string> TemplateLibrary::hashes() const {
    std::string ex;
    for (const auto& e : exemplars.examples) ex += e + "\n---\n";
    return {{"locator", locator.hash},
            {"optimizer", optimizer.hash},
            {"highlight", highlight.hash},
            {"compliance", compliance.hash},
            {"exemplars:" + exemplars.exemplar_set_id, sha256_hex(ex)}};
}

}  // namespace bikeflow

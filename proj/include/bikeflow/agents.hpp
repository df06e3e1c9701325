#pragma once

#include <string>
#include <vector>

#include "bikeflow/domain.hpp"
#include "bikeflow/errors.hpp"
#include "bikeflow/providers.hpp"
#include "bikeflow/templates.hpp"

namespace bikeflow {

inline constexpr int kMinPoolSize = 5;
inline constexpr int kMaxPoolSize = 10;

/// Which image the second generation step edits.
enum class SecondStepInput { highlight, scene };

struct AgentConfig {
    std::string highlight_color = "green";
    int pool_size = 6;
    std::vector<std::string> absence_phrases{"no bike lane", "not present"};
    SecondStepInput second_step_input = SecondStepInput::highlight;
    bool parallel_generation = true;
};

/// Appended to every generation prompt so the editor treats the highlight
/// as the lane footprint.
inline constexpr std::string_view kHighlightStatement = "The highlighted regions represent bike lanes.";

/// Raised when some pool slots still fail after retries; carries the
/// candidates that did complete.
class PartialPoolError : public Error {
  public:
    PartialPoolError(const std::string& message, std::vector<CandidateDesign> completed)
        : Error("partial_pool", message), completed_(std::move(completed)) {}

    [[nodiscard]] const std::vector<CandidateDesign>& completed() const noexcept { return completed_; }

  private:
    std::vector<CandidateDesign> completed_;
};

/// Turns locator prose into a LaneDescription. Absence is decided by the
/// configured phrase list; structure is pulled from labeled lines
/// ("Markings: ...") or, failing that, from keyword-bearing sentences.
[[nodiscard]] LaneDescription parse_locator_response(const std::string& text,
                                                     const std::vector<std::string>& absence_phrases);

[[nodiscard]] std::string compose_generation_prompt(const OptimizedPrompt& optimized, const LaneDescription& lane);

/// Lane localization, prompt optimization and cascade generation over one
/// provider set.
class DesignAgents {
  public:
    DesignAgents(ProviderSet providers, TemplateLibrary templates, AgentConfig config = {});

    [[nodiscard]] LaneDescription locate_lane(const StreetScene& scene) const;

    [[nodiscard]] OptimizedPrompt optimize_prompt(const std::string& user_prompt, const DesignScenario& scenario,
                                                  const ExemplarSet& exemplars) const;
    [[nodiscard]] OptimizedPrompt optimize_prompt(const std::string& user_prompt, const DesignScenario& scenario) const {
        return optimize_prompt(user_prompt, scenario, templates_.exemplars);
    }

    /// Rendered request text for the highlight step (system + user).
    [[nodiscard]] std::string highlight_prompt(const LaneDescription& lane, const std::string& color) const;

    [[nodiscard]] CandidateDesign generate_highlight(const StreetScene& scene, const LaneDescription& lane,
                                                     const std::string& color, const std::string& run_id,
                                                     const std::string& highlight_id) const;

    /// `source` is the image the second step edits (the highlight by default).
    [[nodiscard]] std::vector<CandidateDesign> generate_candidates(const CandidateDesign& highlight,
                                                                   const std::string& final_prompt, int pool_size,
                                                                   const std::string& id_prefix,
                                                                   const Image* source = nullptr) const;

    [[nodiscard]] const AgentConfig& config() const noexcept { return config_; }
    [[nodiscard]] const TemplateLibrary& templates() const noexcept { return templates_; }

  private:
    ProviderSet providers_;
    TemplateLibrary templates_;
    AgentConfig config_;
};

}  // namespace bikeflow

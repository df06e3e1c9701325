#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "bikeflow/providers.hpp"

namespace bikeflow {

/// Canned behavior for the deterministic mock backend. Everything the mock
/// returns is a pure function of (request, script).
struct MockScript {
    std::uint64_t seed = 0;

    // describe(): canned text keyed by image content hash; text-only
    // requests (empty image) go to `text_responder`.
    std::map<std::string, std::string> describe_by_image;
    std::optional<std::string> describe_fallback;
    std::function<std::string(const std::string& system_prompt, const std::string& user_prompt)> text_responder;

    // segment(): explicit masks, then `<masks_dir>/<image hash>.png` sidecars,
    // then the color heuristic when enabled.
    std::map<std::string, Mask> masks_by_image;
    std::filesystem::path masks_dir;
    bool heuristic_segmentation = false;

    // judge(): keyed by judge_key(image hash, prompt).
    std::map<std::string, std::string> judge_by_key;
    std::optional<std::string> judge_fallback;
};

[[nodiscard]] std::string judge_key(const std::string& image_hash, const std::string& prompt);

inline constexpr std::size_t kMockEmbeddingDim = 8;

/// Normalized 8-bin histogram over every channel byte (bin = byte >> 5).
[[nodiscard]] EmbeddingVector byte_histogram(const Image& image);

/// Pixels that look like lane infrastructure paint (white lines, colored
/// surfaces, separators).
[[nodiscard]] Mask paint_mask(const Image& image);

class MockProvider final : public ImageEditor, public VisionLanguageModel, public Embedder, public Segmenter {
  public:
    explicit MockProvider(MockScript script);

    std::vector<Image> edit_image(const Image& image, const std::string& prompt, int n,
                                  const EditOptions& options) override;
    std::string describe(const Image& image, const std::string& system_prompt, const std::string& user_prompt) override;
    std::string judge(const Image& image, const std::string& prompt) override;
    EmbeddingVector embed(const Image& image) override;
    Mask segment(const Image& image) override;

    [[nodiscard]] MockScript& script() noexcept { return script_; }

    /// Every role bound to one shared mock instance.
    [[nodiscard]] static ProviderSet as_provider_set(std::shared_ptr<MockProvider> mock);

  private:
    MockScript script_;
};

/// Canned locator prose describing a lane on the right side of the roadway.
[[nodiscard]] std::string mock_locator_text();

/// Deterministic stand-in for the prompt optimizer: restates the scenario's
/// boundary clauses in the exemplar style.
[[nodiscard]] std::string mock_optimizer_response(const std::string& system_prompt, const std::string& user_prompt);

/// The script used by `--mock` runs: canned locator text, the deterministic
/// optimizer, heuristic segmentation and an all-"yes" judge.
[[nodiscard]] MockScript default_mock_script(std::uint64_t seed);

}  // namespace bikeflow

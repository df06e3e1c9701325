#pragma once

#include "bikeflow/providers.hpp"

namespace bikeflow {

/// JSON-over-HTTP adapter for a model gateway. Every role speaks the same
/// small protocol (all payload images are base64 PNG):
///
///   POST <endpoint>/v1/edit      {model, params, prompt, n, slot, image_png_b64} -> {images_png_b64: [..]}
///   POST <endpoint>/v1/describe  {model, params, system, user, image_png_b64?}   -> {text}
///   POST <endpoint>/v1/judge     {model, params, prompt, image_png_b64}          -> {text}
///   POST <endpoint>/v1/embed     {model, params, image_png_b64}                  -> {embedding: [..]}
///   POST <endpoint>/v1/segment   {model, params, image_png_b64}                  -> {mask_png_b64}
///
/// The bearer token is read from the environment variable named by
/// `credential_ref` at call time. Retries are not applied here; wrap with
/// guard_providers().
class HttpProvider final : public ImageEditor, public VisionLanguageModel, public Embedder, public Segmenter {
  public:
    explicit HttpProvider(ProviderConfig config);

    std::vector<Image> edit_image(const Image& image, const std::string& prompt, int n,
                                  const EditOptions& options) override;
    std::string describe(const Image& image, const std::string& system_prompt, const std::string& user_prompt) override;
    std::string judge(const Image& image, const std::string& prompt) override;
    EmbeddingVector embed(const Image& image) override;
    Mask segment(const Image& image) override;

    [[nodiscard]] const ProviderConfig& config() const noexcept { return config_; }

  private:
    nlohmann::json call(const std::string& path, nlohmann::json body);

    ProviderConfig config_;
};

}  // namespace bikeflow

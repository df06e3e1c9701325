#include "bikeflow/fixtures.hpp"

#include "bikeflow/digest.hpp"
#include "bikeflow/provider_contracts.hpp"

namespace bikeflow {

using nlohmann::json;

namespace {

std::string image_ref(const Image& image) { return image.empty() ? std::string() : content_hash(image); }

json images_to_json(const std::vector<Image>& images) {
    json arr = json::array();
    for (const auto& img : images) arr.push_back(base64_encode(encode_png(img)));
    return {{"images_png_b64", arr}};
}

std::vector<Image> images_from_json(const json& j) {
    std::vector<Image> out;
    for (const auto& item : j.at("images_png_b64")) out.push_back(decode_image(base64_decode(item.get<std::string>())));
    return out;
}

json embedding_to_json(const EmbeddingVector& v) { return {{"values", v.values}}; }

EmbeddingVector embedding_from_json(const json& j) { return {j.at("values").get<std::vector<double>>()}; }

json mask_to_json(const Mask& m) { return {{"mask_png_b64", base64_encode(encode_png(m))}}; }

Mask mask_from_json(const json& j) { return decode_mask(base64_decode(j.at("mask_png_b64").get<std::string>())); }

class Recorder final : public ImageEditor, public VisionLanguageModel, public Embedder, public Segmenter {
  public:
    Recorder(std::string role, const ProviderSet& inner, std::shared_ptr<FixtureStore> store)
        : role_(std::move(role)), inner_(inner), store_(std::move(store)) {}

    std::vector<Image> edit_image(const Image& image, const std::string& prompt, int n,
                                  const EditOptions& options) override {
        auto out = inner_.editor->edit_image(image, prompt, n, options);
        store_->put(role_, fixture_request::edit(image, prompt, n, options), images_to_json(out));
        return out;
    }

    std::string describe(const Image& image, const std::string& system_prompt, const std::string& user_prompt) override {
        auto& vlm = role_ == "optimizer" ? inner_.optimizer : inner_.locator;
        auto out = vlm->describe(image, system_prompt, user_prompt);
        store_->put(role_, fixture_request::describe(image, system_prompt, user_prompt), {{"text", out}});
        return out;
    }

    std::string judge(const Image& image, const std::string& prompt) override {
        auto out = inner_.judge->judge(image, prompt);
        store_->put(role_, fixture_request::judge(image, prompt), {{"text", out}});
        return out;
    }

    EmbeddingVector embed(const Image& image) override {
        auto out = inner_.embedder->embed(image);
        store_->put(role_, fixture_request::embed(image), embedding_to_json(out));
        return out;
    }

    Mask segment(const Image& image) override {
        auto out = inner_.segmenter->segment(image);
        store_->put(role_, fixture_request::segment(image), mask_to_json(out));
        return out;
    }

  private:
    std::string role_;
    ProviderSet inner_;
    std::shared_ptr<FixtureStore> store_;
};

class Replayer final : public ImageEditor, public VisionLanguageModel, public Embedder, public Segmenter {
  public:
    Replayer(std::string role, std::shared_ptr<FixtureStore> store) : role_(std::move(role)), store_(std::move(store)) {}

    std::vector<Image> edit_image(const Image& image, const std::string& prompt, int n,
                                  const EditOptions& options) override {
        check_edit_request(prompt, n);
        return images_from_json(lookup(fixture_request::edit(image, prompt, n, options)));
    }

    std::string describe(const Image& image, const std::string& system_prompt, const std::string& user_prompt) override {
        check_describe_request(system_prompt, user_prompt);
        return lookup(fixture_request::describe(image, system_prompt, user_prompt)).at("text").get<std::string>();
    }

    std::string judge(const Image& image, const std::string& prompt) override {
        check_judge_request(prompt);
        return lookup(fixture_request::judge(image, prompt)).at("text").get<std::string>();
    }

    EmbeddingVector embed(const Image& image) override { return embedding_from_json(lookup(fixture_request::embed(image))); }

    Mask segment(const Image& image) override { return mask_from_json(lookup(fixture_request::segment(image))); }

  private:
    json lookup(const json& request) const {
        auto hit = store_->get(role_, request);
        if (!hit) {
            throw ProviderError(ProviderErrorKind::fixture_miss,
                                "no recorded " + role_ + " fixture for " + request.at("op").get<std::string>() + " " +
                                    FixtureStore::request_hash(request));
        }
        return *hit;
    }

    std::string role_;
    std::shared_ptr<FixtureStore> store_;
};

}  // namespace

std::string FixtureStore::request_hash(const json& request) { return sha256_hex(request.dump()); }

std::filesystem::path FixtureStore::path_for(const std::string& role, const json& request) const {
    return root_ / role / request.at("op").get<std::string>() / (request_hash(request) + ".json");
}

void FixtureStore::put(const std::string& role, const json& request, const json& response) const {
    const json doc{{"request", request}, {"response", response}};
    write_file_atomic(path_for(role, request), doc.dump(2) + "\n");
}

std::optional<json> FixtureStore::get(const std::string& role, const json& request) const {
    const auto path = path_for(role, request);
    if (!std::filesystem::exists(path)) return std::nullopt;
    const json doc = json::parse(read_file_text(path));
    if (doc.at("request") != request) {
        throw ProviderError(ProviderErrorKind::malformed_response, "fixture " + path.string() + " request mismatch");
    }
    return doc.at("response");
}

namespace fixture_request {

json edit(const Image& image, const std::string& prompt, int n, const EditOptions& options) {
    return {{"op", "edit_image"}, {"image", image_ref(image)}, {"prompt", prompt}, {"n", n}, {"slot", options.slot}};
}

json describe(const Image& image, const std::string& system_prompt, const std::string& user_prompt) {
    return {{"op", "describe"}, {"image", image_ref(image)}, {"system", system_prompt}, {"user", user_prompt}};
}

json judge(const Image& image, const std::string& prompt) {
    return {{"op", "judge"}, {"image", image_ref(image)}, {"prompt", prompt}};
}

json embed(const Image& image) { return {{"op", "embed"}, {"image", image_ref(image)}}; }

json segment(const Image& image) { return {{"op", "segment"}, {"image", image_ref(image)}}; }

}  // namespace fixture_request

ProviderSet record_providers(const ProviderSet& inner, std::shared_ptr<FixtureStore> store) {
    inner.require_complete();
    ProviderSet out;
    out.editor = std::make_shared<Recorder>("editor", inner, store);
    out.locator = std::make_shared<Recorder>("locator", inner, store);
    out.optimizer = std::make_shared<Recorder>("optimizer", inner, store);
    out.judge = std::make_shared<Recorder>("judge", inner, store);
    out.embedder = std::make_shared<Recorder>("embedder", inner, store);
    out.segmenter = std::make_shared<Recorder>("segmenter", inner, store);
    return out;
}

ProviderSet replay_providers(std::shared_ptr<FixtureStore> store) {
    ProviderSet out;
    out.editor = std::make_shared<Replayer>("editor", store);
    out.locator = std::make_shared<Replayer>("locator", store);
    out.optimizer = std::make_shared<Replayer>("optimizer", store);
    out.judge = std::make_shared<Replayer>("judge", store);
    out.embedder = std::make_shared<Replayer>("embedder", store);
    out.segmenter = std::make_shared<Replayer>("segmenter", store);
    return out;
}

}  // namespace bikeflow

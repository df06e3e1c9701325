#include "bikeflow/http_provider.hpp"

#include <cstdlib>

#include "bikeflow/digest.hpp"
#include "bikeflow/http_transport.hpp"
#include "bikeflow/provider_contracts.hpp"

namespace bikeflow {

using nlohmann::json;

namespace {

std::string png_b64(const Image& image) { return base64_encode(encode_png(image)); }

template <typename T>
T field(const json& j, const char* name, const std::string& what) {
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw ProviderError(ProviderErrorKind::malformed_response, what + ": missing or invalid '" + name + "'");
    }
}

template <typename F>
auto decoded(F&& f, const std::string& what) -> decltype(f()) {
    try {
        return f();
    } catch (const ProviderError&) {
        throw;
    } catch (const Error& e) {
        throw ProviderError(ProviderErrorKind::malformed_response, what + ": " + e.what());
    }
}

}  // namespace

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {
    config_.validate();
    (void)Endpoint::parse(config_.endpoint);
}

json HttpProvider::call(const std::string& path, json body) {
    std::string token;
    if (!config_.credential_ref.empty()) {
        const char* value = std::getenv(config_.credential_ref.c_str());
        if (value == nullptr || *value == '\0') {
            throw ProviderError(ProviderErrorKind::auth_failure,
                                "credential variable " + config_.credential_ref + " is not set");
        }
        token = value;
    }
    body["model"] = config_.model;
    body["params"] = config_.params;
    HttpTransport transport(config_.endpoint, config_.timeout_s, token);
    const auto result = transport.post_json(path, body);
    raise_for_status(result, path);
    return parse_json_body(result, path);
}

std::vector<Image> HttpProvider::edit_image(const Image& image, const std::string& prompt, int n,
                                            const EditOptions& options) {
    check_edit_request(prompt, n);
    const json res = call("/v1/edit", {{"prompt", prompt}, {"n", n}, {"slot", options.slot}, {"image_png_b64", png_b64(image)}});
    std::vector<Image> out;
    for (const auto& item : field<std::vector<std::string>>(res, "images_png_b64", "edit")) {
        out.push_back(decoded([&] { return decode_image(base64_decode(item)); }, "edit"));
    }
    check_edit_response(image, out, n);
    return out;
}

std::string HttpProvider::describe(const Image& image, const std::string& system_prompt, const std::string& user_prompt) {
    check_describe_request(system_prompt, user_prompt);
    json body{{"system", system_prompt}, {"user", user_prompt}};
    if (!image.empty()) body["image_png_b64"] = png_b64(image);
    return field<std::string>(call("/v1/describe", std::move(body)), "text", "describe");
}

std::string HttpProvider::judge(const Image& image, const std::string& prompt) {
    check_judge_request(prompt);
    return field<std::string>(call("/v1/judge", {{"prompt", prompt}, {"image_png_b64", png_b64(image)}}), "text", "judge");
}

EmbeddingVector HttpProvider::embed(const Image& image) {
    EmbeddingVector v{field<std::vector<double>>(call("/v1/embed", {{"image_png_b64", png_b64(image)}}), "embedding", "embed")};
    check_embedding_response(v);
    return v;
}

Mask HttpProvider::segment(const Image& image) {
    const auto b64 = field<std::string>(call("/v1/segment", {{"image_png_b64", png_b64(image)}}), "mask_png_b64", "segment");
    Mask mask = decoded([&] { return decode_mask(base64_decode(b64)); }, "segment");
    check_mask_response(image, mask);
    return mask;
}

}  // namespace bikeflow

#include "bikeflow/mock_provider.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <sstream>

#include "bikeflow/digest.hpp"
#include "bikeflow/lane_sketch.hpp"
#include "bikeflow/provider_contracts.hpp"

namespace bikeflow {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

BoundaryKind kind_from_text(const std::string& text, Side side) {
    const std::string t = lower(text);
    if (contains(t, "armadillo")) return BoundaryKind::armadillo_buffer;
    if (contains(t, "bollard")) return BoundaryKind::bollard_buffer;
    if (contains(t, "buffer") && !contains(t, "no buffer")) return BoundaryKind::painted_buffer;
    if (contains(t, "parked")) return BoundaryKind::direct_parked_cars;
    return side == Side::left ? BoundaryKind::direct_moving_lane : BoundaryKind::direct_edge;
}

// Text following `label` up to the next boundary label or blank line.
std::string labeled_segment(const std::string& prompt, std::string_view label) {
    const auto pos = prompt.find(label);
    if (pos == std::string::npos) return {};
    const auto start = pos + label.size();
    auto end = prompt.size();
    for (std::string_view stop : {"Left boundary:", "Right boundary:", "\n\n"}) {
        const auto e = prompt.find(stop, start);
        if (e != std::string::npos) end = std::min(end, e);
    }
    return prompt.substr(start, end - start);
}

// "...into a green-painted lane" -> "green".
std::optional<std::string> highlight_color_word(const std::string& prompt) {
    const auto pos = prompt.find("-painted lane");
    if (pos == std::string::npos) return std::nullopt;
    auto begin = pos;
    while (begin > 0 && std::isalpha(static_cast<unsigned char>(prompt[begin - 1]))) --begin;
    if (begin == pos) return std::nullopt;
    return lower(prompt.substr(begin, pos - begin));
}

bool forbids_green(const std::string& lowered) {
    return contains(lowered, "no green") || contains(lowered, "do not paint the updated bike lane green") ||
           contains(lowered, "not be painted green");
}

}  // namespace

std::string judge_key(const std::string& image_hash, const std::string& prompt) {
    return sha256_hex(image_hash + "\n" + sha256_hex(prompt));
}

EmbeddingVector byte_histogram(const Image& image) {
    EmbeddingVector v;
    v.values.assign(kMockEmbeddingDim, 0.0);
    const auto bytes = image.bytes();
    if (bytes.empty()) return v;
    std::array<std::uint64_t, kMockEmbeddingDim> counts{};
    for (std::uint8_t b : bytes) ++counts[b >> 5];
    const double total = static_cast<double>(bytes.size());
    for (std::size_t i = 0; i < kMockEmbeddingDim; ++i) v.values[i] = static_cast<double>(counts[i]) / total;
    return v;
}

Mask paint_mask(const Image& image) {
    Mask mask(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const Rgb c = image.at(x, y);
            const int hi = std::max({c.r, c.g, c.b});
            const int lo = std::min({c.r, c.g, c.b});
            const bool white = lo >= 200;
            const bool saturated = hi - lo >= 80;
            const bool separator_black = hi <= 30;
            mask.set(x, y, white || saturated || separator_black);
        }
    }
    return mask;
}

MockProvider::MockProvider(MockScript script) : script_(std::move(script)) {}

std::vector<Image> MockProvider::edit_image(const Image& image, const std::string& prompt, int n,
                                            const EditOptions& options) {
    check_edit_request(prompt, n);
    const std::string image_hash = content_hash(image);
    const std::string lowered = lower(prompt);

    LaneSketch base;
    if (auto word = highlight_color_word(prompt)) {
        auto color = color_by_name(*word);
        if (!color) {
            const auto h = digest_u64(*word);
            color = Rgb{static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8), static_cast<std::uint8_t>(h >> 16)};
        }
        base.highlight = color;
        base.left = kind_from_text(labeled_segment(prompt, "Left boundary:"), Side::left);
        base.right = kind_from_text(labeled_segment(prompt, "Right boundary:"), Side::right);
    } else {
        base.left = kind_from_text(labeled_segment(prompt, "Left boundary:"), Side::left);
        base.right = kind_from_text(labeled_segment(prompt, "Right boundary:"), Side::right);
        base.green_surface = contains(lowered, "green") && !forbids_green(lowered);
    }

    std::vector<Image> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int slot = options.slot + i;
        std::mt19937_64 rng(digest_u64(image_hash + "|" + prompt + "|" + std::to_string(script_.seed) + "|" +
                                       std::to_string(slot)));
        LaneSketch s = base;
        s.center += (static_cast<double>(rng() % 41) - 20.0) / 1000.0;
        s.lane_width += (static_cast<double>(rng() % 21) - 10.0) / 1000.0;
        if (!s.highlight) {
            const auto defect = rng() % 10;
            if (defect == 0) s.drop_left_feature = s.drop_right_feature = true;
            if (defect == 1) s.spill = true;
        }
        Image img = image;
        draw_lane(img, s);
        out.push_back(std::move(img));
    }
    return out;
}

std::string MockProvider::describe(const Image& image, const std::string& system_prompt,
                                   const std::string& user_prompt) {
    check_describe_request(system_prompt, user_prompt);
    if (image.empty()) {
        if (script_.text_responder) return script_.text_responder(system_prompt, user_prompt);
        throw ProviderError(ProviderErrorKind::mock_miss, "mock has no text responder");
    }
    const std::string hash = content_hash(image);
    if (auto it = script_.describe_by_image.find(hash); it != script_.describe_by_image.end()) return it->second;
    if (script_.describe_fallback) return *script_.describe_fallback;
    throw ProviderError(ProviderErrorKind::mock_miss, "no canned description for image " + hash);
}

std::string MockProvider::judge(const Image& image, const std::string& prompt) {
    check_judge_request(prompt);
    const std::string key = judge_key(content_hash(image), prompt);
    if (auto it = script_.judge_by_key.find(key); it != script_.judge_by_key.end()) return it->second;
    if (script_.judge_fallback) return *script_.judge_fallback;
    throw ProviderError(ProviderErrorKind::mock_miss, "no canned verdict for key " + key);
}

EmbeddingVector MockProvider::embed(const Image& image) { return byte_histogram(image); }

Mask MockProvider::segment(const Image& image) {
    const std::string hash = content_hash(image);
    if (auto it = script_.masks_by_image.find(hash); it != script_.masks_by_image.end()) return it->second;
    if (!script_.masks_dir.empty()) {
        const auto sidecar = script_.masks_dir / (hash + ".png");
        if (std::filesystem::exists(sidecar)) return decode_mask(read_file_bytes(sidecar));
    }
    if (script_.heuristic_segmentation) return paint_mask(image);
    throw ProviderError(ProviderErrorKind::mock_miss, "no mask for image " + hash);
}

ProviderSet MockProvider::as_provider_set(std::shared_ptr<MockProvider> mock) {
    ProviderSet set;
    set.editor = mock;
    set.locator = mock;
    set.optimizer = mock;
    set.judge = mock;
    set.embedder = mock;
    set.segmenter = mock;
    return set;
}

std::string mock_locator_text() {
    return "The primary bike lane runs along the right side of the roadway. "
           "Its left boundary is a continuous solid white line separating it from the adjacent motor-vehicle lane. "
           "Its right boundary is a solid white line separating it from the curb and the parked cars. "
           "The lane is approximately 5 feet wide. "
           "The lane surface is standard asphalt with a white bicycle symbol marking.";
}

std::string mock_optimizer_response(const std::string& /*system_prompt*/, const std::string& user_prompt) {
    std::string left = "Left boundary: a prominent, continuous solid white line";
    std::string right = "Right boundary: a prominent, continuous solid white line";
    std::istringstream lines(user_prompt);
    for (std::string line; std::getline(lines, line);) {
        if (line.rfind("Left boundary:", 0) == 0) left = line;
        if (line.rfind("Right boundary:", 0) == 0) right = line;
    }
    const bool green = contains(lower(user_prompt), "green lane") || contains(lower(user_prompt), "painted green");
    std::string out =
        "The area currently highlighted represents the existing bike lane. Clearly depict an updated bike lane "
        "located along the right-hand side of the road. ";
    out += green ? "Paint the bike lane green, strictly contained between two continuous solid white lines. "
                 : "Do not paint the updated bike lane green; use the standard road surface color only. ";
    out += "Clearly mark both boundaries of the bike lane: 1) " + left + ". 2) " + right + ". ";
    out += "Ensure the updated bike lane is clearly defined and do not alter the background.";
    if (!green) out += " No green paint should be applied.";
    return out;
}

MockScript default_mock_script(std::uint64_t seed) {
    MockScript script;
    script.seed = seed;
    script.describe_fallback = mock_locator_text();
    script.text_responder = mock_optimizer_response;
    script.heuristic_segmentation = true;
    script.judge_fallback = "yes";
    return script;
}

}  // namespace bikeflow

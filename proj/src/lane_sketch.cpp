#include "bikeflow/lane_sketch.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace bikeflow {

namespace {

bool is_buffer(BoundaryKind k) {
    return k == BoundaryKind::painted_buffer || k == BoundaryKind::bollard_buffer ||
           k == BoundaryKind::armadillo_buffer;
}

void vline(Image& img, int x, int thickness, int y0, int y1, Rgb c) {
    img.fill_rect(x - thickness / 2, y0, x - thickness / 2 + thickness, y1, c);
}

void draw_buffer(Image& img, BoundaryKind kind, int x0, int x1, int y0, int thickness, bool hatch) {
    const int h = img.height();
    if (hatch) {
        const int period = std::max(6, (x1 - x0) * 2);
        for (int y = y0; y < h; ++y) {
            for (int x = x0; x < x1; ++x) {
                if (((x + y) % period) < std::max(2, period / 3)) img.set(x, y, palette::white);
            }
        }
    }
    vline(img, x0, thickness, y0, h, palette::white);
    vline(img, x1, thickness, y0, h, palette::white);

    const int spacing = std::max(8, h / 12);
    const int cx = (x0 + x1) / 2;
    const int half = std::max(1, (x1 - x0) / 4);
    if (kind == BoundaryKind::bollard_buffer) {
        const int post = std::max(4, h / 24);
        for (int y = y0 + spacing / 2; y + post < h; y += spacing) {
            for (int band = 0; band < 4; ++band) {
                const Rgb c = band % 2 == 0 ? palette::bollard_red : palette::white;
                img.fill_rect(cx - half, y + band * post / 4, cx + half + 1, y + (band + 1) * post / 4, c);
            }
        }
    } else if (kind == BoundaryKind::armadillo_buffer) {
        const int dome = std::max(2, h / 64);
        for (int y = y0 + spacing / 2; y + dome < h; y += spacing) {
            img.fill_rect(cx - half, y, cx + half + 1, y + dome, palette::armadillo_black);
            img.fill_rect(cx - half, y + dome / 2, cx + half + 1, y + dome / 2 + 1, palette::white);
        }
    }
}

}  // namespace

void draw_lane(Image& img, const LaneSketch& s) {
    if (img.empty()) return;
    const int w = img.width();
    const int h = img.height();
    const int y0 = static_cast<int>(s.top * h);
    const int thickness = std::max(1, w / 200);
    const double ft = s.lane_width / 5.0;
    const int xl = static_cast<int>((s.center - s.lane_width / 2) * w);
    const int xr = static_cast<int>((s.center + s.lane_width / 2) * w);
    const int left_buf = is_buffer(s.left) ? std::max(3, static_cast<int>(BoundarySpec::of(s.left).buffer_width_ft * ft * w)) : 0;
    const int right_buf = is_buffer(s.right) ? std::max(3, static_cast<int>(BoundarySpec::of(s.right).buffer_width_ft * ft * w)) : 0;

    if (s.highlight) {
        img.fill_rect(xl - left_buf, y0, xr + right_buf, h, *s.highlight);
        vline(img, xl - left_buf, thickness, y0, h, palette::white);
        vline(img, xr + right_buf, thickness, y0, h, palette::white);
        return;
    }

    img.fill_rect(xl, y0, xr, h, s.green_surface ? palette::green : palette::lane_surface);
    if (s.spill) {
        img.fill_rect(xl - left_buf - (xr - xl) / 2, y0 + (h - y0) / 3, xl - left_buf, h, palette::green);
    }
    vline(img, xl, thickness, y0, h, palette::white);
    vline(img, xr, thickness, y0, h, palette::white);

    if (left_buf > 0 && !s.drop_left_feature) {
        img.fill_rect(xl - left_buf, y0, xl, h, palette::asphalt);
        draw_buffer(img, s.left, xl - left_buf, xl, y0, thickness, true);
    }
    if (right_buf > 0 && !s.drop_right_feature) {
        img.fill_rect(xr, y0, xr + right_buf, h, palette::asphalt);
        draw_buffer(img, s.right, xr, xr + right_buf, y0, thickness, true);
    }
    if (s.right == BoundaryKind::direct_parked_cars && !s.drop_right_feature) {
        const int car_w = std::max(4, (xr - xl));
        const int car_h = std::max(6, h / 8);
        for (int y = y0 + car_h / 3; y + car_h < h; y += car_h + car_h / 2) {
            img.fill_rect(xr + thickness + 2, y, xr + thickness + 2 + car_w, y + car_h, Rgb{40, 70, 140});
        }
    }
}

Image synthetic_street(int size, std::uint64_t seed) {
    Image img(size, size, palette::asphalt);
    const int horizon = static_cast<int>(0.4 * size);
    img.fill_rect(0, 0, size, horizon, palette::sky);
    img.fill_rect(static_cast<int>(0.9 * size), horizon, size, size, palette::sidewalk);
    std::mt19937_64 rng(seed);
    int x = 0;
    while (x < size) {
        const int bw = std::max(4, static_cast<int>(size / 10 + rng() % std::max(1, size / 8)));
        const int bh = std::max(4, static_cast<int>(horizon / 3 + rng() % std::max(1, horizon / 2)));
        // Low-saturation facades so they never read as lane paint.
        const int base = 90 + static_cast<int>(rng() % 80);
        const Rgb c{static_cast<std::uint8_t>(base), static_cast<std::uint8_t>(base - 6 + static_cast<int>(rng() % 12)),
                    static_cast<std::uint8_t>(base - 12 + static_cast<int>(rng() % 12))};
        img.fill_rect(x, horizon - bh, x + bw, horizon, c);
        x += bw + static_cast<int>(rng() % std::max(1, size / 40));
    }
    // Dashed center line.
    const int cx = size / 3;
    for (int y = horizon; y < size; y += std::max(4, size / 16)) {
        img.fill_rect(cx, y, cx + std::max(1, size / 200), y + std::max(2, size / 32), Rgb{230, 200, 40});
    }
    return img;
}

LaneSketch sketch_for(const DesignScenario& scenario) {
    LaneSketch s;
    s.left = scenario.left.kind;
    s.right = scenario.right.kind;
    return s;
}

Image reference_design_image(const DesignScenario& scenario, int size) {
    Image img = synthetic_street(size, 0);
    draw_lane(img, sketch_for(scenario));
    return img;
}

std::optional<Rgb> color_by_name(std::string_view name) {
    static constexpr std::array<std::pair<std::string_view, Rgb>, 6> colors{{
        {"green", Rgb{52, 168, 83}},
        {"blue", Rgb{40, 90, 220}},
        {"red", Rgb{210, 40, 40}},
        {"yellow", Rgb{240, 210, 40}},
        {"orange", Rgb{245, 140, 30}},
        {"magenta", Rgb{220, 40, 200}},
    }};
    for (const auto& [n, c] : colors) {
        if (n == name) return c;
    }
    return std::nullopt;
}

}  // namespace bikeflow

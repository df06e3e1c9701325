#pragma once

#include <cstdint>
#include <optional>

#include "bikeflow/domain.hpp"
#include "bikeflow/raster.hpp"

namespace bikeflow {

/// Schematic bike-lane drawing used by the mock editor and for the shipped
/// reference designs. Geometry is expressed as fractions of the image width.
struct LaneSketch {
    BoundaryKind left = BoundaryKind::direct_moving_lane;
    BoundaryKind right = BoundaryKind::direct_edge;
    bool green_surface = false;
    std::optional<Rgb> highlight;  // highlight stage: uniform corridor fill
    double center = 0.70;
    double lane_width = 0.12;
    double top = 0.45;            // corridor starts at this fraction of height
    bool drop_left_feature = false;
    bool drop_right_feature = false;
    bool spill = false;           // paint bleeding into the travel lane
};

namespace palette {
inline constexpr Rgb asphalt{72, 72, 76};
inline constexpr Rgb lane_surface{64, 64, 66};
inline constexpr Rgb white{240, 240, 240};
inline constexpr Rgb green{52, 168, 83};
inline constexpr Rgb bollard_red{200, 30, 30};
inline constexpr Rgb armadillo_black{18, 18, 18};
inline constexpr Rgb sky{150, 180, 210};
inline constexpr Rgb sidewalk{170, 165, 155};
}  // namespace palette

void draw_lane(Image& image, const LaneSketch& sketch);

/// Plain synthetic street used when no photograph is available.
[[nodiscard]] Image synthetic_street(int size, std::uint64_t seed);

[[nodiscard]] LaneSketch sketch_for(const DesignScenario& scenario);
/// The schematic reference design for one catalog scenario.
[[nodiscard]] Image reference_design_image(const DesignScenario& scenario, int size = 256);

/// Named color lookup for highlight prompts ("green", "blue", ...).
[[nodiscard]] std::optional<Rgb> color_by_name(std::string_view name);

}  // namespace bikeflow

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bikeflow {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit interleaved RGB raster, row-major.
class Image {
  public:
    Image() = default;
    Image(int width, int height, Rgb fill = {});

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] bool empty() const noexcept { return width_ == 0 || height_ == 0; }

    [[nodiscard]] Rgb at(int x, int y) const;
    void set(int x, int y, Rgb color);
    void fill_rect(int x0, int y0, int x1, int y1, Rgb color);

    [[nodiscard]] std::span<const std::uint8_t> bytes() const noexcept { return pixels_; }
    [[nodiscard]] std::span<std::uint8_t> bytes() noexcept { return pixels_; }

    friend bool operator==(const Image&, const Image&) = default;

  private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Binary mask; every cell is 0 or 1.
class Mask {
  public:
    Mask() = default;
    Mask(int width, int height, std::uint8_t value = 0);

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }

    [[nodiscard]] std::uint8_t at(int x, int y) const;
    void set(int x, int y, bool on);

    [[nodiscard]] std::size_t count() const noexcept;
    [[nodiscard]] bool is_empty() const noexcept { return count() == 0; }
    [[nodiscard]] std::span<const std::uint8_t> cells() const noexcept { return cells_; }

    friend bool operator==(const Mask&, const Mask&) = default;

  private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> cells_;
};

// PNG codec. Decoding accepts any format OpenCV can read (PNG, JPEG).
[[nodiscard]] std::vector<std::uint8_t> encode_png(const Image& image);
[[nodiscard]] std::vector<std::uint8_t> encode_png(const Mask& mask);
[[nodiscard]] Image decode_image(std::span<const std::uint8_t> data);
/// Any nonzero gray level decodes as 1.
[[nodiscard]] Mask decode_mask(std::span<const std::uint8_t> data);

[[nodiscard]] Image read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);
void write_png(const std::filesystem::path& path, const Mask& mask);

/// Content hash of the decoded pixels (dimensions included), independent of
/// the container encoding.
[[nodiscard]] std::string content_hash(const Image& image);
[[nodiscard]] std::string content_hash(const Mask& mask);

}  // namespace bikeflow

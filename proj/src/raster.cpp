#include "bikeflow/raster.hpp"

#include <algorithm>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "bikeflow/digest.hpp"
#include "bikeflow/errors.hpp"

namespace bikeflow {

namespace {

void check_dims(int width, int height) {
    if (width < 0 || height < 0) {
        throw PreconditionError("negative raster dimensions");
    }
}

std::vector<std::uint8_t> encode(const cv::Mat& mat) {
    std::vector<std::uint8_t> out;
    // Fixed compression level keeps the byte stream stable across runs.
    const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imencode(".png", mat, out, params)) {
        throw std::runtime_error("png encode failed");
    }
    return out;
}

}  // namespace

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
    check_dims(width, height);
    pixels_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
        pixels_[i] = fill.r;
        pixels_[i + 1] = fill.g;
        pixels_[i + 2] = fill.b;
    }
}

Rgb Image::at(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void Image::set(int x, int y, Rgb color) {
    const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
    pixels_[i] = color.r;
    pixels_[i + 1] = color.g;
    pixels_[i + 2] = color.b;
}

void Image::fill_rect(int x0, int y0, int x1, int y1, Rgb color) {
    x0 = std::clamp(x0, 0, width_);
    x1 = std::clamp(x1, 0, width_);
    y0 = std::clamp(y0, 0, height_);
    y1 = std::clamp(y1, 0, height_);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            set(x, y, color);
        }
    }
}

Mask::Mask(int width, int height, std::uint8_t value) : width_(width), height_(height) {
    check_dims(width, height);
    cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), value ? 1 : 0);
}

std::uint8_t Mask::at(int x, int y) const {
    return cells_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
}

void Mask::set(int x, int y, bool on) {
    cells_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)] = on ? 1 : 0;
}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    cv::Mat bgr(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width(); ++x) {
            const Rgb c = image.at(x, y);
            row[x] = cv::Vec3b(c.b, c.g, c.r);
        }
    }
    return encode(bgr);
}

std::vector<std::uint8_t> encode_png(const Mask& mask) {
    cv::Mat gray(mask.height(), mask.width(), CV_8UC1);
    for (int y = 0; y < mask.height(); ++y) {
        auto* row = gray.ptr<std::uint8_t>(y);
        for (int x = 0; x < mask.width(); ++x) {
            row[x] = mask.at(x, y) ? 255 : 0;
        }
    }
    return encode(gray);
}

Image decode_image(std::span<const std::uint8_t> data) {
    const cv::Mat buf(1, static_cast<int>(data.size()), CV_8UC1, const_cast<std::uint8_t*>(data.data()));
    const cv::Mat bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (bgr.empty()) {
        throw Error("malformed_response", "undecodable image payload");
    }
    Image out(bgr.cols, bgr.rows);
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            out.set(x, y, {row[x][2], row[x][1], row[x][0]});
        }
    }
    return out;
}

Mask decode_mask(std::span<const std::uint8_t> data) {
    const cv::Mat buf(1, static_cast<int>(data.size()), CV_8UC1, const_cast<std::uint8_t*>(data.data()));
    const cv::Mat gray = cv::imdecode(buf, cv::IMREAD_GRAYSCALE);
    if (gray.empty()) {
        throw Error("malformed_response", "undecodable mask payload");
    }
    Mask out(gray.cols, gray.rows);
    for (int y = 0; y < gray.rows; ++y) {
        const auto* row = gray.ptr<std::uint8_t>(y);
        for (int x = 0; x < gray.cols; ++x) {
            out.set(x, y, row[x] != 0);
        }
    }
    return out;
}

Image read_image(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return decode_image(bytes);
}

void write_png(const std::filesystem::path& path, const Image& image) {
    write_file_atomic(path, std::span<const std::uint8_t>(encode_png(image)));
}

void write_png(const std::filesystem::path& path, const Mask& mask) {
    write_file_atomic(path, std::span<const std::uint8_t>(encode_png(mask)));
}

std::string content_hash(const Image& image) {
    Sha256 h;
    h.update("rgb8:");
    h.update_u64(static_cast<std::uint64_t>(image.width()));
    h.update_u64(static_cast<std::uint64_t>(image.height()));
    h.update(image.bytes());
    return h.hex();
}

std::string content_hash(const Mask& mask) {
    Sha256 h;
    h.update("mask1:");
    h.update_u64(static_cast<std::uint64_t>(mask.width()));
    h.update_u64(static_cast<std::uint64_t>(mask.height()));
    h.update(mask.cells());
    return h.hex();
}

}  // namespace bikeflow

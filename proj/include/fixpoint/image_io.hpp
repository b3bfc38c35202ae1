#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fixpoint {

/// Interleaved 8-bit RGB.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

/// PNG (any bit depth/colour type, converted to 8-bit RGB) or binary PPM (P6).
RgbImage read_image(const std::filesystem::path& path);
void write_png(const RgbImage& image, const std::filesystem::path& path);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

RgbImage crop(const RgbImage& image, int x0, int y0, int x1, int y1);

}  // namespace fixpoint

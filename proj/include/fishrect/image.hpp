#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fishrect {

/// 8-bit raster with 1 or 3 interleaved channels, row-major.
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> data;

    RasterImage() = default;
    RasterImage(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::uint8_t &at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool valid() const {
        return width > 0 && height > 0 && (channels == 1 || channels == 3) &&
               data.size() == static_cast<std::size_t>(width) * height * channels;
    }
};

RasterImage to_gray(const RasterImage &img);

/// PNG (.png), PGM (.pgm, P5) or PPM (.ppm, P6) chosen by extension.
RasterImage read_image(const std::filesystem::path &path);
void write_image(const std::filesystem::path &path, const RasterImage &img);

} // namespace fishrect

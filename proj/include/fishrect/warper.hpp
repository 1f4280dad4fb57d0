#pragma once

#include <filesystem>
#include <cmath>
#include <limits>
#include <vector>

#include "fishrect/image.hpp"
#include "fishrect/rectmodel.hpp"

namespace fishrect {

/// Per-rectified-pixel source coordinates; quiet NaN marks unmapped pixels.
struct BackwardLut {
    int width = 0;
    int height = 0;
    /// Source image dimensions, 0 when unknown (e.g. loaded from a file).
    int source_width = 0;
    int source_height = 0;
    std::vector<float> uv; // interleaved (u, v), row-major

    bool mapped(int x, int y) const { return !std::isnan(uv[index(x, y)]); }
    float u(int x, int y) const { return uv[index(x, y)]; }
    float v(int x, int y) const { return uv[index(x, y) + 1]; }

  private:
    std::size_t index(int x, int y) const { return 2 * (static_cast<std::size_t>(y) * width + x); }
};

/// Entry (x, y) = inverse_map(m, view, (x, y)) when that lands inside the
/// source image, NaN otherwise.
BackwardLut build_lut(const RectificationModel &m, View view);

/// Bilinear resampling through the LUT; unmapped pixels are 0. If `mask` is
/// given it receives 255 for mapped and 0 for unmapped pixels.
/// Throws DimensionMismatch.
RasterImage warp_image(const RasterImage &src, const BackwardLut &lut, RasterImage *mask = nullptr);

/// `RLUT`, u16 version, u32 width, u32 height, then (u, v) f32 pairs, all little-endian.
void save_lut(const std::filesystem::path &path, const BackwardLut &lut);
BackwardLut load_lut(const std::filesystem::path &path);

} // namespace fishrect

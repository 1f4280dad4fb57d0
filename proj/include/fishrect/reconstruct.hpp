#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fishrect/image.hpp"
#include "fishrect/rectmodel.hpp"

namespace fishrect {

/// Per-pixel disparity d with u2 = u1 - d; NaN marks invalid pixels.
struct DisparityMap {
    int width = 0;
    int height = 0;
    std::vector<float> d;

    DisparityMap() = default;
    DisparityMap(int w, int h) : width(w), height(h), d(static_cast<std::size_t>(w) * h, std::nanf("")) {}

    float &at(int x, int y) { return d[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return d[static_cast<std::size_t>(y) * width + x]; }
    bool valid(int x, int y) const { return std::isfinite(at(x, y)); }
};

struct ColoredPoint {
    Vec3 position;
    std::array<std::uint8_t, 3> rgb{0, 0, 0};
};

/// Triangulates from rectified angles. The result is in the rectified frame of
/// camera 1; camera 2's coordinates are (X - b, Y, Z). Throws ZeroDisparityAngle.
Vec3 point_from_angles(double gamma1, double gamma2, double beta, double baseline);

/// gamma1 = psi_u^-1(u1), gamma2 = psi_u^-1(u1 - d), beta = psi_v^-1(v1), then
/// point_from_angles. Throws ZeroDisparityAngle or OutOfRange.
Vec3 disparity_to_point(const RectificationModel &m, double u1, double v1, double d, double baseline);

/// One point per valid disparity; pixels whose disparity cannot be
/// triangulated are skipped. Colours come from `left` (rectified) when given.
/// Throws DimensionMismatch.
std::vector<ColoredPoint> reconstruct_cloud(const DisparityMap &disp, const RectificationModel &m, double baseline,
                                            const RasterImage *left = nullptr);

struct BlockMatchConfig {
    int window = 9;
    int max_disparity = 64;
    float lr_tolerance = 1.0f;
};

/// Integer SAD block matching along rows with a left-right consistency check.
/// Ambiguous minima are marked invalid. Throws DimensionMismatch.
DisparityMap block_match(const RasterImage &left, const RasterImage &right, const BlockMatchConfig &cfg = {});

/// Little-endian PFM (scale -1), rows stored bottom-up.
void save_pfm(const std::filesystem::path &path, const DisparityMap &disp);
DisparityMap load_pfm(const std::filesystem::path &path);

/// ASCII PLY, with per-vertex colour when `with_color`.
void save_ply(const std::filesystem::path &path, std::span<const ColoredPoint> points, bool with_color);

} // namespace fishrect

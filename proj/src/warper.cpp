#include "fishrect/warper.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace fishrect {

namespace {

constexpr std::uint16_t kLutVersion = 1;

static_assert(std::endian::native == std::endian::little, "LUT I/O assumes a little-endian host");

template <typename T> void put(std::ostream &out, T value) {
    out.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

template <typename T> T get(std::istream &in) {
    T value{};
    in.read(reinterpret_cast<char *>(&value), sizeof(T));
    return value;
}

} // namespace

BackwardLut build_lut(const RectificationModel &m, View view) {
    const CameraModel &cam = m.camera(view);
    const Mat3 &R = m.rotation(view);
    BackwardLut lut;
    lut.width = m.out_width;
    lut.height = m.out_height;
    lut.source_width = cam.width();
    lut.source_height = cam.height();
    lut.uv.assign(2 * static_cast<std::size_t>(lut.width) * lut.height, std::numeric_limits<float>::quiet_NaN());

    // Separable: gamma depends only on the column, beta only on the row.
    std::vector<std::optional<double>> gamma(static_cast<std::size_t>(lut.width));
    for (int x = 0; x < lut.width; ++x)
        gamma[static_cast<std::size_t>(x)] = try_invert_projection(m.psi_u, x);
    for (int y = 0; y < lut.height; ++y) {
        const auto beta = try_invert_projection(m.psi_v, y);
        if (!beta)
            continue;
        for (int x = 0; x < lut.width; ++x) {
            const auto &g = gamma[static_cast<std::size_t>(x)];
            if (!g)
                continue;
            const auto p = cam.try_bearing_to_pixel(R * angles_to_bearing({*beta, *g}));
            if (!p || !cam.in_image(*p))
                continue;
            const std::size_t i = 2 * (static_cast<std::size_t>(y) * lut.width + x);
            lut.uv[i] = static_cast<float>(p->u);
            lut.uv[i + 1] = static_cast<float>(p->v);
        }
    }
    return lut;
}

RasterImage warp_image(const RasterImage &src, const BackwardLut &lut, RasterImage *mask) {
    if (!src.valid())
        throw Error(ErrorCode::DimensionMismatch, "source image buffer does not match its dimensions");
    if ((lut.source_width > 0 && lut.source_width != src.width) ||
        (lut.source_height > 0 && lut.source_height != src.height))
        throw Error(ErrorCode::DimensionMismatch, "source image does not match the LUT's camera");
    RasterImage out(lut.width, lut.height, src.channels);
    if (mask)
        *mask = RasterImage(lut.width, lut.height, 1);
    for (int y = 0; y < lut.height; ++y) {
        for (int x = 0; x < lut.width; ++x) {
            if (!lut.mapped(x, y))
                continue;
            const double u = lut.u(x, y);
            const double v = lut.v(x, y);
            if (u < 0.0 || v < 0.0 || u > src.width - 1.0 || v > src.height - 1.0)
                throw Error(ErrorCode::DimensionMismatch, "LUT entry lies outside the source image");
            const int x0 = std::min(static_cast<int>(u), src.width - 2);
            const int y0 = std::min(static_cast<int>(v), src.height - 2);
            const double fx = u - x0;
            const double fy = v - y0;
            for (int c = 0; c < src.channels; ++c) {
                const double top = (1.0 - fx) * src.at(x0, y0, c) + fx * src.at(x0 + 1, y0, c);
                const double bottom = (1.0 - fx) * src.at(x0, y0 + 1, c) + fx * src.at(x0 + 1, y0 + 1, c);
                const double value = (1.0 - fy) * top + fy * bottom;
                out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 255.0)));
            }
            if (mask)
                mask->at(x, y) = 255;
        }
    }
    return out;
}

void save_lut(const std::filesystem::path &path, const BackwardLut &lut) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write("RLUT", 4);
    put<std::uint16_t>(out, kLutVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(lut.width));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(lut.height));
    for (float f : lut.uv) {
        // Canonical quiet NaN keeps files bitwise reproducible.
        put<float>(out, std::isnan(f) ? std::numeric_limits<float>::quiet_NaN() : f);
    }
}

BackwardLut load_lut(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (!in || std::memcmp(magic.data(), "RLUT", 4) != 0)
        throw Error(ErrorCode::ParseError, path.string() + ": missing RLUT magic");
    const auto version = get<std::uint16_t>(in);
    if (version != kLutVersion)
        throw Error(ErrorCode::ParseError, path.string() + ": unsupported LUT version " + std::to_string(version));
    BackwardLut lut;
    lut.width = static_cast<int>(get<std::uint32_t>(in));
    lut.height = static_cast<int>(get<std::uint32_t>(in));
    if (!in || lut.width <= 0 || lut.height <= 0)
        throw Error(ErrorCode::ParseError, path.string() + ": bad LUT dimensions");
    lut.uv.resize(2 * static_cast<std::size_t>(lut.width) * lut.height);
    in.read(reinterpret_cast<char *>(lut.uv.data()), static_cast<std::streamsize>(lut.uv.size() * sizeof(float)));
    if (!in)
        throw Error(ErrorCode::ParseError, path.string() + ": truncated LUT data");
    return lut;
}

} // namespace fishrect

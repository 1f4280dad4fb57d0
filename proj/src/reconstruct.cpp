#include "fishrect/reconstruct.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "io_util.hpp"

namespace fishrect {

Vec3 point_from_angles(double gamma1, double gamma2, double beta, double baseline) {
    const double t1 = std::tan(gamma1);
    const double t2 = std::tan(gamma2);
    const double diff = t1 - t2;
    if (std::abs(diff) < 1e-12)
        throw Error(ErrorCode::ZeroDisparityAngle, "rays are parallel; point at infinity");
    // Distance from the baseline axis. Z = rho cos(beta) and Y = rho sin(beta)
    // coincide with the tan(beta) / sqrt(1 + tan^2(beta)) form for |beta| < pi/2.
    const double rho = baseline / diff;
    return Vec3(baseline * t1 / diff, rho * std::sin(beta), rho * std::cos(beta));
}

Vec3 disparity_to_point(const RectificationModel &m, double u1, double v1, double d, double baseline) {
    const double gamma1 = invert_projection(m.psi_u, u1);
    const double gamma2 = invert_projection(m.psi_u, u1 - d);
    const double beta = invert_projection(m.psi_v, v1);
    return point_from_angles(gamma1, gamma2, beta, baseline);
}

std::vector<ColoredPoint> reconstruct_cloud(const DisparityMap &disp, const RectificationModel &m, double baseline,
                                            const RasterImage *left) {
    if (disp.width != m.out_width || disp.height != m.out_height)
        throw Error(ErrorCode::DimensionMismatch, "disparity map does not match the rectified image size");
    if (left && (left->width != disp.width || left->height != disp.height))
        throw Error(ErrorCode::DimensionMismatch, "colour image does not match the disparity map");
    std::vector<ColoredPoint> cloud;
    for (int y = 0; y < disp.height; ++y) {
        const auto beta = try_invert_projection(m.psi_v, y);
        if (!beta)
            continue;
        for (int x = 0; x < disp.width; ++x) {
            if (!disp.valid(x, y))
                continue;
            const auto g1 = try_invert_projection(m.psi_u, x);
            const auto g2 = try_invert_projection(m.psi_u, x - static_cast<double>(disp.at(x, y)));
            if (!g1 || !g2)
                continue;
            ColoredPoint cp;
            try {
                cp.position = point_from_angles(*g1, *g2, *beta, baseline);
            } catch (const Error &) {
                continue;
            }
            if (left) {
                for (int c = 0; c < 3; ++c)
                    cp.rgb[static_cast<std::size_t>(c)] = left->at(x, y, left->channels == 3 ? c : 0);
            }
            cloud.push_back(cp);
        }
    }
    return cloud;
}

DisparityMap block_match(const RasterImage &left_in, const RasterImage &right_in, const BlockMatchConfig &cfg) {
    if (left_in.width != right_in.width || left_in.height != right_in.height)
        throw Error(ErrorCode::DimensionMismatch, "stereo images differ in size");
    const RasterImage left = to_gray(left_in);
    const RasterImage right = to_gray(right_in);
    const int W = left.width, H = left.height;
    const int r = std::max(cfg.window, 1) / 2;
    const int D = std::max(cfg.max_disparity, 0);
    const std::size_t plane = static_cast<std::size_t>(W) * H;
    constexpr std::uint32_t kNoCost = std::numeric_limits<std::uint32_t>::max();

    // cost[d](x, y): SAD of the window at left (x, y) against right (x - d, y).
    std::vector<std::uint32_t> cost(plane * static_cast<std::size_t>(D + 1), kNoCost);
    std::vector<std::uint32_t> integral(static_cast<std::size_t>(W + 1) * (H + 1));
    for (int d = 0; d <= D; ++d) {
        std::fill(integral.begin(), integral.end(), 0u);
        for (int y = 0; y < H; ++y) {
            std::uint32_t row = 0;
            for (int x = 0; x < W; ++x) {
                if (x - d >= 0)
                    row += static_cast<std::uint32_t>(std::abs(left.at(x, y) - right.at(x - d, y)));
                integral[static_cast<std::size_t>(y + 1) * (W + 1) + x + 1] =
                    integral[static_cast<std::size_t>(y) * (W + 1) + x + 1] + row;
            }
        }
        const auto box = [&](int x0, int y0, int x1, int y1) {
            const auto I = [&](int x, int y) { return integral[static_cast<std::size_t>(y) * (W + 1) + x]; };
            return I(x1 + 1, y1 + 1) - I(x0, y1 + 1) - I(x1 + 1, y0) + I(x0, y0);
        };
        for (int y = r; y < H - r; ++y)
            for (int x = r + d; x < W - r; ++x)
                cost[static_cast<std::size_t>(d) * plane + static_cast<std::size_t>(y) * W + x] =
                    box(x - r, y - r, x + r, y + r);
    }

    // Winner-take-all; a minimum shared with a non-adjacent disparity is ambiguous.
    const auto pick = [&](auto &&cost_at) -> int {
        int best = -1;
        std::uint32_t best_cost = kNoCost;
        for (int d = 0; d <= D; ++d) {
            const std::uint32_t c = cost_at(d);
            if (c < best_cost) {
                best_cost = c;
                best = d;
            }
        }
        if (best < 0)
            return -1;
        for (int d = 0; d <= D; ++d)
            if (std::abs(d - best) > 1 && cost_at(d) == best_cost)
                return -1;
        return best;
    };

    std::vector<int> left_disp(plane, -1), right_disp(plane, -1);
    for (int y = r; y < H - r; ++y) {
        for (int x = r; x < W - r; ++x) {
            left_disp[static_cast<std::size_t>(y) * W + x] = pick([&](int d) {
                return cost[static_cast<std::size_t>(d) * plane + static_cast<std::size_t>(y) * W + x];
            });
            right_disp[static_cast<std::size_t>(y) * W + x] = pick([&](int d) {
                const int xl = x + d;
                if (xl >= W - r)
                    return kNoCost;
                return cost[static_cast<std::size_t>(d) * plane + static_cast<std::size_t>(y) * W + xl];
            });
        }
    }

    DisparityMap out(W, H);
    for (int y = r; y < H - r; ++y) {
        for (int x = r; x < W - r; ++x) {
            const int dl = left_disp[static_cast<std::size_t>(y) * W + x];
            if (dl < 0)
                continue;
            const int xr = x - dl;
            const int dr = right_disp[static_cast<std::size_t>(y) * W + xr];
            if (dr < 0 || std::abs(dr - dl) > cfg.lr_tolerance)
                continue;
            out.at(x, y) = static_cast<float>(dl);
        }
    }
    return out;
}

void save_pfm(const std::filesystem::path &path, const DisparityMap &disp) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "Pf\n" << disp.width << ' ' << disp.height << "\n-1.0\n";
    for (int y = disp.height - 1; y >= 0; --y) {
        for (int x = 0; x < disp.width; ++x) {
            const float f = disp.valid(x, y) ? disp.at(x, y) : std::numeric_limits<float>::quiet_NaN();
            out.write(reinterpret_cast<const char *>(&f), sizeof(float));
        }
    }
}

DisparityMap load_pfm(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    in.get();
    if (!in || magic != "Pf" || w <= 0 || h <= 0)
        throw Error(ErrorCode::ParseError, path.string() + ": not a single-channel PFM");
    if (scale >= 0.0)
        throw Error(ErrorCode::ParseError, path.string() + ": big-endian PFM is not supported");
    DisparityMap disp(w, h);
    for (int y = h - 1; y >= 0; --y) {
        for (int x = 0; x < w; ++x) {
            float f = 0.0f;
            in.read(reinterpret_cast<char *>(&f), sizeof(float));
            disp.at(x, y) = f;
        }
    }
    if (!in)
        throw Error(ErrorCode::ParseError, path.string() + ": truncated PFM data");
    return disp;
}

void save_ply(const std::filesystem::path &path, std::span<const ColoredPoint> points, bool with_color) {
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
        << "\nproperty double x\nproperty double y\nproperty double z\n";
    if (with_color)
        out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out << "end_header\n";
    for (const auto &p : points) {
        out << detail::format_double(p.position.x()) << ' ' << detail::format_double(p.position.y()) << ' '
            << detail::format_double(p.position.z());
        if (with_color)
            out << ' ' << int(p.rgb[0]) << ' ' << int(p.rgb[1]) << ' ' << int(p.rgb[2]);
        out << '\n';
    }
}

} // namespace fishrect

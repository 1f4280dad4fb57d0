#include "fishrect/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "fishrect/reconstruct.hpp"

namespace fishrect {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

RelativePose lateral_pose() {
    RelativePose pose;
    pose.rotation = rotation_from_axis_angle(Vec3(0.02, -0.03, 0.015));
    pose.translation_dir = Vec3(1.0, 0.02, -0.03).normalized();
    pose.baseline = 0.3;
    return pose;
}

std::optional<Pixel> project_in_image(const CameraModel &cam, const Vec3 &X) {
    if (X.norm() < 1e-12)
        return std::nullopt;
    auto p = cam.try_bearing_to_pixel(X.normalized());
    if (!p || !cam.in_image(*p))
        return std::nullopt;
    return p;
}

Vec3 to_second(const RelativePose &pose, const Vec3 &X1) {
    return pose.rotation.transpose() * (X1 - pose.baseline * pose.translation_dir);
}

void splat(RasterImage &img, const Pixel &p, const std::array<std::uint8_t, 3> &rgb, double sigma) {
    const int reach = static_cast<int>(std::ceil(3.0 * sigma));
    const int x0 = static_cast<int>(std::floor(p.u)) - reach, x1 = static_cast<int>(std::ceil(p.u)) + reach;
    const int y0 = static_cast<int>(std::floor(p.v)) - reach, y1 = static_cast<int>(std::ceil(p.v)) + reach;
    for (int y = std::max(y0, 0); y <= std::min(y1, img.height - 1); ++y) {
        for (int x = std::max(x0, 0); x <= std::min(x1, img.width - 1); ++x) {
            const double d2 = (x - p.u) * (x - p.u) + (y - p.v) * (y - p.v);
            const double w = std::exp(-0.5 * d2 / (sigma * sigma));
            for (int c = 0; c < img.channels; ++c) {
                const auto val = static_cast<std::uint8_t>(std::lround(w * rgb[static_cast<std::size_t>(c)]));
                img.at(x, y, c) = std::max(img.at(x, y, c), val);
            }
        }
    }
}

RasterImage render_planes(const std::vector<CheckerPlane> &planes, const CameraModel &cam, const Vec3 &origin,
                          const Mat3 &to_first, int ss) {
    RasterImage img(cam.width(), cam.height(), 1, 0);
    const int n = std::max(ss, 1);
    for (int y = 0; y < cam.height(); ++y) {
        for (int x = 0; x < cam.width(); ++x) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                for (int i = 0; i < n; ++i) {
                    const Pixel p{x + (i + 0.5) / n - 0.5, y + (j + 0.5) / n - 0.5};
                    const auto b = cam.try_pixel_to_bearing(p);
                    if (!b)
                        continue;
                    const Vec3 dir = to_first * *b;
                    double best = std::numeric_limits<double>::infinity();
                    double shade = 128.0;
                    for (const auto &plane : planes) {
                        const auto hit = plane.intersect(origin, dir);
                        if (!hit)
                            continue;
                        const Vec3 pt = plane.origin + plane.cell * (hit->x() * plane.axis_u + hit->y() * plane.axis_v);
                        const double dist = (pt - origin).norm();
                        if (dist < best) {
                            best = dist;
                            const auto cu = static_cast<long>(std::floor(hit->x()));
                            const auto cv = static_cast<long>(std::floor(hit->y()));
                            shade = ((cu + cv) % 2 == 0) ? 220.0 : 35.0;
                        }
                    }
                    acc += shade;
                }
            }
            img.at(x, y) = static_cast<std::uint8_t>(std::lround(acc / (n * n)));
        }
    }
    return img;
}

} // namespace

StereoRig default_fisheye_rig() {
    const double theta_max = 160.0 * kDeg;
    const double f = 320.0 / (0.5 * theta_max);
    const Pixel c{319.5, 239.5};
    return {CameraModel::equidistant(f, c, 640, 480, theta_max), CameraModel::equidistant(f, c, 640, 480, theta_max),
            lateral_pose()};
}

StereoRig pinhole_rig() {
    const double f = 320.0 / std::tan(30.0 * kDeg);
    const Pixel c{319.5, 239.5};
    const double theta_max = 60.0 * kDeg;
    return {CameraModel::pinhole(f, c, 640, 480, theta_max), CameraModel::pinhole(f, c, 640, 480, theta_max),
            lateral_pose()};
}

StereoRig polynomial_rig() {
    const double theta_max = 160.0 * kDeg;
    const Pixel c{319.5, 239.5};
    const std::vector<double> k{260.0, 0.0, -20.0};
    return {CameraModel::polynomial(k, c, 640, 480, theta_max), CameraModel::polynomial(k, c, 640, 480, theta_max),
            lateral_pose()};
}

std::vector<Vec3> CheckerPlane::interior_corners() const {
    std::vector<Vec3> out;
    for (int j = 1; j < cells_v; ++j)
        for (int i = 1; i < cells_u; ++i)
            out.push_back(origin + cell * (i * axis_u + j * axis_v));
    return out;
}

std::optional<Vec2> CheckerPlane::intersect(const Vec3 &o, const Vec3 &dir) const {
    const Vec3 n = axis_u.cross(axis_v);
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-12)
        return std::nullopt;
    const double s = n.dot(origin - o) / denom;
    if (!(s > 0.0))
        return std::nullopt;
    const Vec3 rel = o + s * dir - origin;
    const double a = rel.dot(axis_u) / cell;
    const double b = rel.dot(axis_v) / cell;
    if (a < 0.0 || b < 0.0 || a > cells_u || b > cells_v)
        return std::nullopt;
    return Vec2(a, b);
}

CheckerPlane centered_checkerboard(const StereoRig &rig, double distance, double cell, int cells_u, int cells_v) {
    CheckerPlane plane;
    plane.cell = cell;
    plane.cells_u = cells_u;
    plane.cells_v = cells_v;
    const Vec3 center = 0.5 * rig.pose.baseline * rig.pose.translation_dir + distance * Vec3::UnitZ();
    plane.origin = center - 0.5 * cell * (cells_u * plane.axis_u + cells_v * plane.axis_v);
    return plane;
}

SyntheticScene generate_scene(const StereoRig &rig, std::uint64_t seed, int n_points, double depth_min,
                              double depth_max) {
    if (n_points < 1)
        throw Error(ErrorCode::DomainError, "n_points must be at least 1");
    if (!(depth_min > 0.0) || !(depth_min < depth_max))
        throw Error(ErrorCode::DomainError, "need 0 < depth_min < depth_max");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double cos_max = std::cos(std::min(0.5 * rig.cam1.theta_max(), std::numbers::pi));
    const double r3_lo = depth_min * depth_min * depth_min;
    const double r3_hi = depth_max * depth_max * depth_max;

    SyntheticScene scene;
    const long max_attempts = 1000L * n_points;
    for (long attempt = 0; attempt < max_attempts && static_cast<int>(scene.points.size()) < n_points; ++attempt) {
        // Uniform in solid angle over the camera-1 cone, uniform in volume along range.
        const double cz = 1.0 - unit(rng) * (1.0 - cos_max);
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        const double range = std::cbrt(r3_lo + unit(rng) * (r3_hi - r3_lo));
        const double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
        const Vec3 X1 = range * Vec3(sz * std::cos(phi), sz * std::sin(phi), cz);
        std::array<std::uint8_t, 3> rgb{};
        for (auto &c : rgb)
            c = static_cast<std::uint8_t>(64 + static_cast<int>(unit(rng) * 191.0));
        if (!project_in_image(rig.cam1, X1) || !project_in_image(rig.cam2, to_second(rig.pose, X1)))
            continue;
        scene.points.push_back({X1, rgb});
    }
    if (static_cast<int>(scene.points.size()) < n_points)
        throw Error(ErrorCode::EmptyFrustum, "could not place points visible in both cameras");
    return scene;
}

GroundTruthBundle render_pair(const SyntheticScene &scene, const StereoRig &rig, const RenderConfig &cfg) {
    GroundTruthBundle out{{}, {}, rig.cam1, rig.cam2, rig.pose, {}, {}, {}};

    for (const auto &sp : scene.points) {
        const auto p1 = project_in_image(rig.cam1, sp.position);
        const auto p2 = project_in_image(rig.cam2, to_second(rig.pose, sp.position));
        if (!p1 || !p2)
            continue;
        out.exact_correspondences.push_back({*p1, *p2});
        out.points.push_back(sp);
    }

    out.correspondences = out.exact_correspondences;
    if (cfg.noise_sigma > 0.0) {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        for (auto &c : out.correspondences) {
            c.first.u += noise(rng);
            c.first.v += noise(rng);
            c.second.u += noise(rng);
            c.second.v += noise(rng);
        }
    }

    if (cfg.mode == RenderMode::Checkerboard) {
        out.left = render_planes(scene.planes, rig.cam1, Vec3::Zero(), Mat3::Identity(), cfg.supersample);
        out.right = render_planes(scene.planes, rig.cam2, rig.pose.baseline * rig.pose.translation_dir,
                                  rig.pose.rotation, cfg.supersample);
    } else {
        out.left = RasterImage(rig.cam1.width(), rig.cam1.height(), 3, 0);
        out.right = RasterImage(rig.cam2.width(), rig.cam2.height(), 3, 0);
        for (std::size_t i = 0; i < out.points.size(); ++i) {
            splat(out.left, out.exact_correspondences[i].first, out.points[i].rgb, cfg.dot_sigma);
            splat(out.right, out.exact_correspondences[i].second, out.points[i].rgb, cfg.dot_sigma);
        }
    }
    return out;
}

double oracle_invert(const std::function<double(double)> &fn, double lo, double hi, double value) {
    double flo = fn(lo), fhi = fn(hi);
    const bool increasing = fhi >= flo;
    if (!std::isfinite(value) || value < std::min(flo, fhi) || value > std::max(flo, fhi))
        throw Error(ErrorCode::OutOfRange, "value outside the function's range on the domain");
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        const bool below = increasing ? fn(mid) < value : fn(mid) > value;
        (below ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

void write_bundle(const std::filesystem::path &dir, const GroundTruthBundle &bundle) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    write_image(dir / "left.png", bundle.left);
    write_image(dir / "right.png", bundle.right);
    save_correspondences(dir / "corrs.csv", bundle.correspondences);
    save_pose(dir / "pose.json", bundle.pose);
    save_camera_model(dir / "cam1.json", bundle.cam1);
    save_camera_model(dir / "cam2.json", bundle.cam2);
    std::vector<ColoredPoint> cloud;
    cloud.reserve(bundle.points.size());
    for (const auto &p : bundle.points)
        cloud.push_back({p.position, p.rgb});
    save_ply(dir / "points.ply", cloud, true);
}

} // namespace fishrect

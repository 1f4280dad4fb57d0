#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "fishrect/camera.hpp"
#include "fishrect/epipolar.hpp"
#include "fishrect/image.hpp"

namespace fishrect {

struct StereoRig {
    CameraModel cam1;
    CameraModel cam2;
    RelativePose pose;
};

/// Equidistant 160 degree cameras, 640x480, baseline 0.3, lateral translation
/// with a few degrees of relative rotation.
StereoRig default_fisheye_rig();
/// Pinhole cameras with a 60 degree horizontal field of view.
StereoRig pinhole_rig();
/// Same layout as the fisheye rig but with a polynomial lens r = 260 t - 20 t^3.
StereoRig polynomial_rig();

struct CheckerPlane {
    Vec3 origin = Vec3::Zero(); // a board corner, camera-1 frame
    Vec3 axis_u = Vec3::UnitX();
    Vec3 axis_v = Vec3::UnitY();
    double cell = 0.1;
    int cells_u = 8;
    int cells_v = 6;

    /// Interior corners, row-major.
    std::vector<Vec3> interior_corners() const;
    /// Ray-plane hit in board cell units, or nullopt if missing the board.
    std::optional<Vec2> intersect(const Vec3 &origin_pt, const Vec3 &dir) const;
};

struct ScenePoint {
    Vec3 position; // camera-1 frame
    std::array<std::uint8_t, 3> rgb{255, 255, 255};
};

struct SyntheticScene {
    std::vector<ScenePoint> points;
    std::vector<CheckerPlane> planes;
};

/// Points uniformly distributed in the volume seen by both cameras, at
/// distances [depth_min, depth_max] from camera 1. Throws DomainError on bad
/// arguments and EmptyFrustum if the shared volume cannot be sampled.
SyntheticScene generate_scene(const StereoRig &rig, std::uint64_t seed, int n_points, double depth_min,
                              double depth_max);

/// A board facing camera 1 whose centre sits `distance` ahead of the baseline midpoint.
CheckerPlane centered_checkerboard(const StereoRig &rig, double distance, double cell, int cells_u, int cells_v);

enum class RenderMode { Dots, Checkerboard };

struct RenderConfig {
    RenderMode mode = RenderMode::Dots;
    double dot_sigma = 0.8;
    int supersample = 8;
    double noise_sigma = 0.0; // Gaussian pixel noise on emitted correspondences
    std::uint64_t seed = 0;
};

struct GroundTruthBundle {
    RasterImage left;
    RasterImage right;
    CameraModel cam1;
    CameraModel cam2;
    RelativePose pose;
    std::vector<Correspondence> correspondences; // noisy if noise_sigma > 0
    std::vector<Correspondence> exact_correspondences;
    std::vector<ScenePoint> points; // one per correspondence
};

/// Projects scene points through both cameras; points not visible in both are
/// dropped. Images are dots or checkerboard rasterizations per `cfg.mode`.
GroundTruthBundle render_pair(const SyntheticScene &scene, const StereoRig &rig, const RenderConfig &cfg = {});

/// Bisection oracle to 1e-12 for strictly monotone `fn` on [lo, hi]. Throws OutOfRange.
double oracle_invert(const std::function<double(double)> &fn, double lo, double hi, double value);

/// left.png, right.png, corrs.csv, pose.json, cam1.json, cam2.json, points.ply
void write_bundle(const std::filesystem::path &dir, const GroundTruthBundle &bundle);

} // namespace fishrect

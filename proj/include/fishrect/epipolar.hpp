#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fishrect/camera.hpp"
#include "fishrect/common.hpp"

namespace fishrect {

/// Pose of camera 2 relative to camera 1.
///
/// A point X1 in camera-1 coordinates has camera-2 coordinates
/// X2 = rotation^T * (X1 - baseline * translation_dir), i.e. the columns of
/// `rotation` are camera 2's axes expressed in camera 1's frame.
struct RelativePose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation_dir = Vec3::UnitX();
    double baseline = 1.0;
};

/// Rotations taking each camera's bearings into the common rectified frame:
/// b_rect = R^T * b_cam. The rectified X axis runs along the baseline.
struct RectifyingRotations {
    Mat3 R1 = Mat3::Identity();
    Mat3 R2 = Mat3::Identity();
};

struct MultiplierPair {
    Mat3 A = Mat3::Identity();
    Mat3 A_prime = Mat3::Identity();
    double lambda = 1.0;
};

struct Correspondence {
    Pixel first;
    Pixel second;
};

struct RansacConfig {
    int iterations = 1000;
    /// Angular Sampson threshold in radians.
    double threshold = 1e-3;
    std::uint64_t seed = 0;
    double min_inlier_ratio = 0.5;
};

/// [e]x for e = (1, 0, 0).
Mat3 canonical_essential();

Mat3 skew(const Vec3 &v);

/// E = R2 [e]x R1^T.
Mat3 essential_from_rotations(const Mat3 &R1, const Mat3 &R2);

/// Essential matrix in the b2^T E b1 = 0 convention implied by `pose`.
Mat3 essential_from_pose(const RelativePose &pose);

/// Rectifying rotations for a pose. The free roll about the baseline is fixed
/// so that the rectified optical axis is as close as possible to the mean of
/// the two original optical axes. Throws DegeneratePose.
RectifyingRotations rectifying_rotations(const RelativePose &pose);

/// (R2^T b2)^T [e]x (R1^T b1).
double rectified_epipolar_residual(const RectifyingRotations &rot, const Bearing &b1, const Bearing &b2);

/// Builds a pair with A = [a11 A1; 0 A2] and A' = [a11p A1p; 0 lambda*A2].
/// Throws SingularInput.
MultiplierPair make_multiplier_pair(double a11, const Eigen::RowVector2d &A1_row, const Eigen::Matrix2d &A2_block,
                                    double a11p, const Eigen::RowVector2d &A1p_row, double lambda);

/// || A'^T [e]x A / s - [e]x ||_F with s the least-squares scale of A'^T [e]x A
/// onto [e]x. Infinity when the product has no component along [e]x.
double verify_multiplier_pair(const Mat3 &A, const Mat3 &A_prime);

/// First-order angular distance (radians) of a bearing pair from the epipolar
/// constraint b2^T E b1 = 0, measured on the unit spheres.
double angular_sampson(const Mat3 &E, const Bearing &b1, const Bearing &b2);

/// Linear essential estimation on bearing vectors inside RANSAC, followed by
/// inlier re-estimation and a non-linear refinement of the angular Sampson
/// error. Throws InsufficientCorrespondences or NoConsensus.
RelativePose estimate_relative_pose(std::span<const Correspondence> corrs, const CameraModel &cam1,
                                    const CameraModel &cam2, const RansacConfig &ransac = {});

/// Rotation angle of R_a^T R_b in radians.
double rotation_angle_between(const Mat3 &Ra, const Mat3 &Rb);

Mat3 rotation_from_axis_angle(const Vec3 &axis_angle);

// File formats

std::vector<Correspondence> load_correspondences(const std::filesystem::path &path);
void save_correspondences(const std::filesystem::path &path, std::span<const Correspondence> corrs);

RelativePose load_pose(const std::filesystem::path &path);
void save_pose(const std::filesystem::path &path, const RelativePose &pose);

} // namespace fishrect

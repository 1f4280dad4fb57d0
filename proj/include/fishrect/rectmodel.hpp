#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <utility>

#include <nlohmann/json_fwd.hpp>

#include "fishrect/camera.hpp"
#include "fishrect/common.hpp"
#include "fishrect/epipolar.hpp"

namespace fishrect {

/// Angular coordinates of a bearing in the rectified frame. `beta` selects the
/// epipolar plane (the plane through the baseline), `gamma` the position along
/// the epipolar line.
struct AngleCoords {
    double beta = 0.0;
    double gamma = 0.0;
};

/// beta = atan2(by, bz), gamma = atan(bx / sqrt(by^2 + bz^2)). Throws DegenerateRay.
AngleCoords bearing_to_angles(const Bearing &b);
std::optional<AngleCoords> try_bearing_to_angles(const Bearing &b) noexcept;
Bearing angles_to_bearing(const AngleCoords &a);

/// psi(theta) = c0 + c1 theta + c2 theta^2 + c3 theta^3 on [-theta_half, theta_half].
struct CubicProjection {
    std::array<double, 4> c{0.0, 1.0, 0.0, 0.0};
    double theta_half = 1.0;

    double value(double theta) const { return c[0] + theta * (c[1] + theta * (c[2] + theta * c[3])); }
    double derivative(double theta) const { return c[1] + theta * (2.0 * c[2] + theta * 3.0 * c[3]); }
    bool in_domain(double theta) const { return std::abs(theta) <= theta_half * (1.0 + 1e-12); }
    double lower() const { return value(-theta_half); }
    double upper() const { return value(theta_half); }
};

/// Throws DomainError outside [-theta_half, theta_half].
double eval_projection(const CubicProjection &p, double theta);

/// Unique theta with p(theta) = value, by bisection. Throws OutOfRange.
double invert_projection(const CubicProjection &p, double value);
std::optional<double> try_invert_projection(const CubicProjection &p, double value) noexcept;

/// Derivative positive at n_points uniform control points and no root of the
/// derivative quadratic inside the domain.
bool check_monotone(const CubicProjection &p, int n_points = 33);

/// H = Psi o R^T o Phi for both cameras of a stereo pair. Psi_u and Psi_v are
/// shared by the two cameras so that equal beta always lands on the same row.
struct RectificationModel {
    RectifyingRotations rotations;
    CubicProjection psi_u;
    CubicProjection psi_v;
    CameraModel cam1;
    CameraModel cam2;
    int out_width = 0;
    int out_height = 0;

    const CameraModel &camera(View view) const { return view == View::First ? cam1 : cam2; }
    const Mat3 &rotation(View view) const { return view == View::First ? rotations.R1 : rotations.R2; }
};

/// Default theta_half: half the field of view of the wider camera.
double default_theta_half(const CameraModel &cam1, const CameraModel &cam2);

/// Per-axis default domains (gamma, beta): the off-axis angle at which each
/// principal axis leaves the wider image, capped at half the FOV. Equals
/// default_theta_half() horizontally when the FOV circle spans the width.
std::pair<double, double> default_half_angles(const CameraModel &cam1, const CameraModel &cam2);

/// Both projections monotone and mapping their domains into the output image.
bool satisfies_coverage(const RectificationModel &m);

/// Rectified angles of a source pixel; nullopt if outside the camera FOV.
std::optional<AngleCoords> source_angles(const RectificationModel &m, View view, const Pixel &p) noexcept;

std::optional<Pixel> try_forward_map(const RectificationModel &m, View view, const Pixel &p) noexcept;
/// Throws OutOfFov (source outside the camera FOV) or DomainError (angles
/// outside the projection domain).
Pixel forward_map(const RectificationModel &m, View view, const Pixel &p);

std::optional<Pixel> try_inverse_map(const RectificationModel &m, View view, const Pixel &q) noexcept;
/// Throws OutOfRange when q has no preimage.
Pixel inverse_map(const RectificationModel &m, View view, const Pixel &q);

nlohmann::json model_to_json(const RectificationModel &m);
RectificationModel model_from_json(const nlohmann::json &j);
void save_model(const std::filesystem::path &path, const RectificationModel &m);
RectificationModel load_model(const std::filesystem::path &path);

} // namespace fishrect

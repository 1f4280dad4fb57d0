#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fishrect/common.hpp"

namespace fishrect {

enum class CameraKind { Equidistant, Polynomial, Pinhole };

const char *to_string(CameraKind kind);

/// Radially symmetric central camera.
///
/// The image radius of a ray at angle theta from the optical axis is
///   equidistant: r = f * theta
///   pinhole:     r = f * tan(theta)
///   polynomial:  r = k[0] * theta + k[1] * theta^2 + ... + k[n-1] * theta^n
/// and the ray's azimuth equals the azimuth of (p - center). The radial
/// function must be strictly increasing on [0, theta_max / 2].
class CameraModel {
  public:
    static CameraModel equidistant(double focal, Pixel center, int width, int height, double theta_max);
    static CameraModel pinhole(double focal, Pixel center, int width, int height, double theta_max);
    static CameraModel polynomial(std::vector<double> coeffs, Pixel center, int width, int height,
                                  double theta_max);

    CameraKind kind() const { return kind_; }
    double focal() const { return focal_; }
    const std::vector<double> &poly_coeffs() const { return coeffs_; }
    Pixel center() const { return center_; }
    int width() const { return width_; }
    int height() const { return height_; }
    double theta_max() const { return theta_max_; }

    /// Image radius in pixels of a ray at angle theta from the optical axis.
    double radius(double theta) const;
    double radius_derivative(double theta) const;
    /// Inverse of radius() on [0, theta_max / 2]; nullopt beyond the maximum radius.
    std::optional<double> theta_from_radius(double r) const;
    double max_radius() const { return max_radius_; }
    /// Pixels per radian at the optical axis.
    double axial_focal() const { return radius_derivative(0.0); }

    std::optional<Bearing> try_pixel_to_bearing(const Pixel &p) const noexcept;
    std::optional<Pixel> try_bearing_to_pixel(const Bearing &b) const noexcept;

    /// Throws OutOfFov or NonFinite.
    Bearing pixel_to_bearing(const Pixel &p) const;
    /// Throws OutOfFov or NonFinite.
    Pixel bearing_to_pixel(const Bearing &b) const;

    /// True if p lies inside the pixel-centre rectangle [0, w-1] x [0, h-1].
    bool in_image(const Pixel &p) const;

  private:
    CameraModel() = default;
    void validate();

    CameraKind kind_ = CameraKind::Equidistant;
    double focal_ = 0.0;
    std::vector<double> coeffs_;
    Pixel center_;
    int width_ = 0;
    int height_ = 0;
    double theta_max_ = 0.0;
    double max_radius_ = 0.0;
};

CameraModel camera_from_json(const nlohmann::json &j);
nlohmann::json camera_to_json(const CameraModel &model);

/// Throws ParseError or InvalidModel.
CameraModel load_camera_model(const std::filesystem::path &path);
void save_camera_model(const std::filesystem::path &path, const CameraModel &model);

} // namespace fishrect

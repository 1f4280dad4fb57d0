#include "fishrect/camera.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fishrect {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr int kMonotoneScanPoints = 1000;

bool finite(const Pixel &p) { return std::isfinite(p.u) && std::isfinite(p.v); }

} // namespace

const char *to_string(CameraKind kind) {
    switch (kind) {
    case CameraKind::Equidistant: return "equidistant";
    case CameraKind::Polynomial: return "polynomial";
    case CameraKind::Pinhole: return "pinhole";
    }
    return "unknown";
}

CameraModel CameraModel::equidistant(double focal, Pixel center, int width, int height, double theta_max) {
    CameraModel m;
    m.kind_ = CameraKind::Equidistant;
    m.focal_ = focal;
    m.center_ = center;
    m.width_ = width;
    m.height_ = height;
    m.theta_max_ = theta_max;
    m.validate();
    return m;
}

CameraModel CameraModel::pinhole(double focal, Pixel center, int width, int height, double theta_max) {
    CameraModel m = CameraModel();
    m.kind_ = CameraKind::Pinhole;
    m.focal_ = focal;
    m.center_ = center;
    m.width_ = width;
    m.height_ = height;
    m.theta_max_ = theta_max;
    m.validate();
    return m;
}

CameraModel CameraModel::polynomial(std::vector<double> coeffs, Pixel center, int width, int height,
                                    double theta_max) {
    CameraModel m;
    m.kind_ = CameraKind::Polynomial;
    m.coeffs_ = std::move(coeffs);
    m.center_ = center;
    m.width_ = width;
    m.height_ = height;
    m.theta_max_ = theta_max;
    m.validate();
    return m;
}

void CameraModel::validate() {
    if (width_ < 2 || height_ < 2)
        throw Error(ErrorCode::InvalidModel, "image dimensions must be at least 2x2");
    if (!finite(center_))
        throw Error(ErrorCode::InvalidModel, "principal point is not finite");
    if (!(theta_max_ > 0.0 && theta_max_ < 2.0 * std::numbers::pi))
        throw Error(ErrorCode::InvalidModel, "theta_max must lie in (0, 2*pi)");
    switch (kind_) {
    case CameraKind::Equidistant:
        if (!(focal_ > 0.0) || !std::isfinite(focal_))
            throw Error(ErrorCode::InvalidModel, "focal must be positive");
        break;
    case CameraKind::Pinhole:
        if (!(focal_ > 0.0) || !std::isfinite(focal_))
            throw Error(ErrorCode::InvalidModel, "focal must be positive");
        if (!(theta_max_ < std::numbers::pi))
            throw Error(ErrorCode::InvalidModel, "pinhole field of view must be below 180 degrees");
        break;
    case CameraKind::Polynomial: {
        if (coeffs_.empty())
            throw Error(ErrorCode::InvalidModel, "polynomial camera needs at least one coefficient");
        for (double c : coeffs_)
            if (!std::isfinite(c))
                throw Error(ErrorCode::InvalidModel, "polynomial coefficient is not finite");
        const double half = 0.5 * theta_max_;
        double prev_r = 0.0;
        for (int i = 0; i <= kMonotoneScanPoints; ++i) {
            const double theta = half * i / kMonotoneScanPoints;
            const double r = radius(theta);
            if (!(radius_derivative(theta) > 0.0) || (i > 0 && !(r > prev_r))) {
                std::ostringstream os;
                os << "radial polynomial is not strictly increasing at theta = " << theta << " rad";
                throw Error(ErrorCode::InvalidModel, os.str());
            }
            prev_r = r;
        }
        break;
    }
    }
    max_radius_ = radius(0.5 * theta_max_);
}

double CameraModel::radius(double theta) const {
    switch (kind_) {
    case CameraKind::Equidistant: return focal_ * theta;
    case CameraKind::Pinhole: return focal_ * std::tan(theta);
    case CameraKind::Polynomial: {
        double r = 0.0;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it)
            r = (r + *it) * theta;
        return r;
    }
    }
    return 0.0;
}

double CameraModel::radius_derivative(double theta) const {
    switch (kind_) {
    case CameraKind::Equidistant: return focal_;
    case CameraKind::Pinhole: {
        const double c = std::cos(theta);
        return focal_ / (c * c);
    }
    case CameraKind::Polynomial: {
        double d = 0.0;
        for (std::size_t k = coeffs_.size(); k-- > 0;)
            d = d * theta + static_cast<double>(k + 1) * coeffs_[k];
        return d;
    }
    }
    return 0.0;
}

std::optional<double> CameraModel::theta_from_radius(double r) const {
    if (!(r >= 0.0) || r > max_radius_ * (1.0 + 1e-12) + 1e-12)
        return std::nullopt;
    switch (kind_) {
    case CameraKind::Equidistant: return r / focal_;
    case CameraKind::Pinhole: return std::atan2(r, focal_);
    case CameraKind::Polynomial: {
        // r(theta) is strictly increasing on the half field of view.
        double lo = 0.0;
        double hi = 0.5 * theta_max_;
        if (r >= max_radius_)
            return hi;
        for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (radius(mid) < r)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }
    }
    return std::nullopt;
}

std::optional<Bearing> CameraModel::try_pixel_to_bearing(const Pixel &p) const noexcept {
    if (!finite(p))
        return std::nullopt;
    const double dx = p.u - center_.u;
    const double dy = p.v - center_.v;
    const double r = std::hypot(dx, dy);
    const auto theta = theta_from_radius(r);
    if (!theta)
        return std::nullopt;
    if (r == 0.0)
        return Bearing(0.0, 0.0, 1.0);
    const double s = std::sin(*theta) / r;
    return Bearing(s * dx, s * dy, std::cos(*theta));
}

std::optional<Pixel> CameraModel::try_bearing_to_pixel(const Bearing &b) const noexcept {
    if (!b.allFinite())
        return std::nullopt;
    const double rho = std::hypot(b.x(), b.y());
    if (rho == 0.0 && b.z() <= 0.0)
        return std::nullopt;
    const double theta = std::atan2(rho, b.z());
    if (theta > 0.5 * theta_max_ + 1e-12)
        return std::nullopt;
    if (rho == 0.0)
        return center_;
    const double r = radius(theta) / rho;
    return Pixel{center_.u + r * b.x(), center_.v + r * b.y()};
}

Bearing CameraModel::pixel_to_bearing(const Pixel &p) const {
    if (!finite(p))
        throw Error(ErrorCode::NonFinite, "pixel coordinate is not finite");
    auto b = try_pixel_to_bearing(p);
    if (!b) {
        std::ostringstream os;
        os << "pixel (" << p.u << ", " << p.v << ") lies outside the field of view";
        throw Error(ErrorCode::OutOfFov, os.str());
    }
    return *b;
}

Pixel CameraModel::bearing_to_pixel(const Bearing &b) const {
    if (!b.allFinite())
        throw Error(ErrorCode::NonFinite, "bearing vector is not finite");
    auto p = try_bearing_to_pixel(b);
    if (!p)
        throw Error(ErrorCode::OutOfFov, "bearing angle exceeds half the field of view");
    return *p;
}

bool CameraModel::in_image(const Pixel &p) const {
    return p.u >= 0.0 && p.v >= 0.0 && p.u <= width_ - 1.0 && p.v <= height_ - 1.0;
}

CameraModel camera_from_json(const nlohmann::json &j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        const Pixel center{j.at("cx").get<double>(), j.at("cy").get<double>()};
        const int width = j.at("width").get<int>();
        const int height = j.at("height").get<int>();
        const double theta_max = j.at("theta_max_deg").get<double>() * kDeg;
        if (kind == "equidistant")
            return CameraModel::equidistant(j.at("focal").get<double>(), center, width, height, theta_max);
        if (kind == "pinhole")
            return CameraModel::pinhole(j.at("focal").get<double>(), center, width, height, theta_max);
        if (kind == "polynomial")
            return CameraModel::polynomial(j.at("poly_coeffs").get<std::vector<double>>(), center, width,
                                           height, theta_max);
        throw Error(ErrorCode::ParseError, "unknown camera kind '" + kind + "'");
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
}

nlohmann::json camera_to_json(const CameraModel &model) {
    nlohmann::json j;
    j["kind"] = to_string(model.kind());
    if (model.kind() == CameraKind::Polynomial)
        j["poly_coeffs"] = model.poly_coeffs();
    else
        j["focal"] = model.focal();
    j["cx"] = model.center().u;
    j["cy"] = model.center().v;
    j["width"] = model.width();
    j["height"] = model.height();
    j["theta_max_deg"] = model.theta_max() / kDeg;
    return j;
}

CameraModel load_camera_model(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::ParseError, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return camera_from_json(j);
}

void save_camera_model(const std::filesystem::path &path, const CameraModel &model) {
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << camera_to_json(model).dump(2) << '\n';
}

} // namespace fishrect

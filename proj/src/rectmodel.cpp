#include "fishrect/rectmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

namespace fishrect {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<double> to_row_major(const Mat3 &m) {
    std::vector<double> out(9);
    for (int i = 0; i < 9; ++i)
        out[static_cast<std::size_t>(i)] = m(i / 3, i % 3);
    return out;
}

Mat3 from_row_major(const std::vector<double> &v) {
    if (v.size() != 9)
        throw Error(ErrorCode::ParseError, "rotation needs 9 numbers");
    Mat3 m;
    for (int i = 0; i < 9; ++i)
        m(i / 3, i % 3) = v[static_cast<std::size_t>(i)];
    return m;
}

CubicProjection projection_from_json(const nlohmann::json &coeffs, double theta_half_deg) {
    const auto c = coeffs.get<std::vector<double>>();
    if (c.size() != 4)
        throw Error(ErrorCode::ParseError, "projection needs 4 coefficients");
    CubicProjection p;
    std::copy(c.begin(), c.end(), p.c.begin());
    p.theta_half = theta_half_deg * kDeg;
    return p;
}

} // namespace

std::optional<AngleCoords> try_bearing_to_angles(const Bearing &b) noexcept {
    const double yz = std::hypot(b.y(), b.z());
    if (yz == 0.0 || !b.allFinite())
        return std::nullopt;
    return AngleCoords{std::atan2(b.y(), b.z()), std::atan2(b.x(), yz)};
}

AngleCoords bearing_to_angles(const Bearing &b) {
    auto a = try_bearing_to_angles(b);
    if (!a)
        throw Error(ErrorCode::DegenerateRay, "ray is parallel to the baseline");
    return *a;
}

Bearing angles_to_bearing(const AngleCoords &a) {
    const double cg = std::cos(a.gamma);
    return Bearing(std::sin(a.gamma), cg * std::sin(a.beta), cg * std::cos(a.beta));
}

double eval_projection(const CubicProjection &p, double theta) {
    if (!p.in_domain(theta))
        throw Error(ErrorCode::DomainError, "theta " + std::to_string(theta) + " outside [-" +
                                                std::to_string(p.theta_half) + ", " + std::to_string(p.theta_half) +
                                                "]");
    return p.value(theta);
}

std::optional<double> try_invert_projection(const CubicProjection &p, double value) noexcept {
    const double lo_val = p.lower();
    const double hi_val = p.upper();
    const double tol = 1e-9 * std::max(1.0, std::abs(hi_val - lo_val));
    if (!std::isfinite(value) || value < lo_val - tol || value > hi_val + tol)
        return std::nullopt;
    double lo = -p.theta_half;
    double hi = p.theta_half;
    if (value <= lo_val)
        return lo;
    if (value >= hi_val)
        return hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        if (p.value(mid) < value)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double invert_projection(const CubicProjection &p, double value) {
    auto theta = try_invert_projection(p, value);
    if (!theta)
        throw Error(ErrorCode::OutOfRange, "value " + std::to_string(value) + " outside the projection range");
    return *theta;
}

bool check_monotone(const CubicProjection &p, int n_points) {
    n_points = std::max(n_points, 2);
    const double h = p.theta_half;
    for (int i = 0; i < n_points; ++i) {
        const double theta = -h + 2.0 * h * i / (n_points - 1);
        if (!(p.derivative(theta) > 0.0))
            return false;
    }
    // Exact: the derivative c1 + 2 c2 t + 3 c3 t^2 has no root in [-h, h].
    const double a = 3.0 * p.c[3];
    const double b = 2.0 * p.c[2];
    const double c = p.c[1];
    const auto inside = [h](double t) { return t >= -h && t <= h; };
    if (a == 0.0) {
        if (b == 0.0)
            return c > 0.0;
        return !inside(-c / b);
    }
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0)
        return true;
    const double sq = std::sqrt(disc);
    // Numerically stable quadratic roots.
    const double q = -0.5 * (b + std::copysign(sq, b));
    const double r1 = q / a;
    const double r2 = q != 0.0 ? c / q : r1;
    return !inside(r1) && !inside(r2);
}

double default_theta_half(const CameraModel &cam1, const CameraModel &cam2) {
    return 0.5 * std::max(cam1.theta_max(), cam2.theta_max());
}

std::pair<double, double> default_half_angles(const CameraModel &cam1, const CameraModel &cam2) {
    // Off-axis angle of the image border along each principal axis, capped at half the FOV.
    const auto border_angle = [](const CameraModel &cam, double half_extent) {
        if (half_extent >= cam.max_radius())
            return 0.5 * cam.theta_max();
        const Bearing b = cam.pixel_to_bearing({cam.center().u + half_extent, cam.center().v});
        return std::min(0.5 * cam.theta_max(), std::acos(std::clamp(b.z(), -1.0, 1.0)));
    };
    double half_u = 0.0, half_v = 0.0;
    for (const CameraModel *cam : {&cam1, &cam2}) {
        half_u = std::max(half_u, border_angle(*cam, 0.5 * cam->width()));
        half_v = std::max(half_v, border_angle(*cam, 0.5 * cam->height()));
    }
    return {half_u, half_v};
}

bool satisfies_coverage(const RectificationModel &m) {
    const double tol = 1e-9;
    return m.psi_u.lower() >= -tol && m.psi_u.upper() <= m.out_width + tol && m.psi_v.lower() >= -tol &&
           m.psi_v.upper() <= m.out_height + tol;
}

std::optional<AngleCoords> source_angles(const RectificationModel &m, View view, const Pixel &p) noexcept {
    const auto b = m.camera(view).try_pixel_to_bearing(p);
    if (!b)
        return std::nullopt;
    return try_bearing_to_angles(m.rotation(view).transpose() * *b);
}

std::optional<Pixel> try_forward_map(const RectificationModel &m, View view, const Pixel &p) noexcept {
    const auto a = source_angles(m, view, p);
    if (!a || !m.psi_u.in_domain(a->gamma) || !m.psi_v.in_domain(a->beta))
        return std::nullopt;
    return Pixel{m.psi_u.value(a->gamma), m.psi_v.value(a->beta)};
}

Pixel forward_map(const RectificationModel &m, View view, const Pixel &p) {
    const Bearing b = m.camera(view).pixel_to_bearing(p);
    const AngleCoords a = bearing_to_angles(m.rotation(view).transpose() * b);
    return Pixel{eval_projection(m.psi_u, a.gamma), eval_projection(m.psi_v, a.beta)};
}

std::optional<Pixel> try_inverse_map(const RectificationModel &m, View view, const Pixel &q) noexcept {
    const auto gamma = try_invert_projection(m.psi_u, q.u);
    const auto beta = try_invert_projection(m.psi_v, q.v);
    if (!gamma || !beta)
        return std::nullopt;
    const Bearing b = m.rotation(view) * angles_to_bearing({*beta, *gamma});
    return m.camera(view).try_bearing_to_pixel(b);
}

Pixel inverse_map(const RectificationModel &m, View view, const Pixel &q) {
    auto p = try_inverse_map(m, view, q);
    if (!p)
        throw Error(ErrorCode::OutOfRange, "rectified pixel (" + std::to_string(q.u) + ", " + std::to_string(q.v) +
                                               ") has no source preimage");
    return *p;
}

nlohmann::json model_to_json(const RectificationModel &m) {
    nlohmann::json j;
    j["R1"] = to_row_major(m.rotations.R1);
    j["R2"] = to_row_major(m.rotations.R2);
    j["cu"] = m.psi_u.c;
    j["cv"] = m.psi_v.c;
    j["theta_half_u_deg"] = m.psi_u.theta_half / kDeg;
    j["theta_half_v_deg"] = m.psi_v.theta_half / kDeg;
    j["out_width"] = m.out_width;
    j["out_height"] = m.out_height;
    j["cam1"] = camera_to_json(m.cam1);
    j["cam2"] = camera_to_json(m.cam2);
    return j;
}

RectificationModel model_from_json(const nlohmann::json &j) {
    try {
        RectificationModel m{
            RectifyingRotations{from_row_major(j.at("R1").get<std::vector<double>>()),
                                from_row_major(j.at("R2").get<std::vector<double>>())},
            projection_from_json(j.at("cu"), j.at("theta_half_u_deg").get<double>()),
            projection_from_json(j.at("cv"), j.at("theta_half_v_deg").get<double>()),
            camera_from_json(j.at("cam1")),
            camera_from_json(j.at("cam2")),
            j.at("out_width").get<int>(),
            j.at("out_height").get<int>(),
        };
        if (m.out_width < 1 || m.out_height < 1)
            throw Error(ErrorCode::InvalidModel, "output dimensions must be positive");
        if (!check_monotone(m.psi_u) || !check_monotone(m.psi_v))
            throw Error(ErrorCode::InvalidModel, "projection polynomials are not monotone");
        return m;
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
}

void save_model(const std::filesystem::path &path, const RectificationModel &m) {
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << model_to_json(m).dump(2) << '\n';
}

RectificationModel load_model(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::ParseError, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

} // namespace fishrect

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "fishrect/camera.hpp"
#include "support.hpp"

using namespace fishrect;

namespace {

constexpr double kPi = std::numbers::pi;

CameraModel equi200() { return CameraModel::equidistant(200.0, {320.0, 240.0}, 640, 480, 2.0 * kPi * 0.99); }

} // namespace

TEST(Camera, PrincipalPointIsOpticalAxis) {
    const Bearing b = equi200().pixel_to_bearing({320.0, 240.0});
    EXPECT_DOUBLE_EQ(b.x(), 0.0);
    EXPECT_DOUBLE_EQ(b.y(), 0.0);
    EXPECT_DOUBLE_EQ(b.z(), 1.0);
}

TEST(Camera, EquidistantRadiusToAngle) {
    // 200 px off-centre at 200 px/rad is one radian off-axis.
    const Bearing b = equi200().pixel_to_bearing({520.0, 240.0});
    EXPECT_NEAR(b.x(), std::sin(1.0), 1e-15);
    EXPECT_NEAR(b.y(), 0.0, 1e-15);
    EXPECT_NEAR(b.z(), std::cos(1.0), 1e-15);
    EXPECT_NEAR(b.x(), 0.84147, 1e-5);
    EXPECT_NEAR(b.z(), 0.54030, 1e-5);
}

TEST(Camera, EquidistantBearingToPixel) {
    const auto cam = equi200();
    const Pixel p = cam.bearing_to_pixel(Vec3(std::sin(1.0), 0.0, std::cos(1.0)));
    EXPECT_NEAR(p.u, 520.0, 1e-12);
    EXPECT_NEAR(p.v, 240.0, 1e-12);
    const Pixel c = cam.bearing_to_pixel(Vec3::UnitZ());
    EXPECT_DOUBLE_EQ(c.u, 320.0);
    EXPECT_DOUBLE_EQ(c.v, 240.0);
}

TEST(Camera, PinholeRadius) {
    const auto cam = CameraModel::pinhole(500.0, {320.0, 240.0}, 1000, 480, 170.0 * kPi / 180.0);
    const Bearing b = cam.pixel_to_bearing({820.0, 240.0});
    EXPECT_NEAR(b.x(), std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(b.y(), 0.0, 1e-15);
    EXPECT_NEAR(b.z(), std::sqrt(0.5), 1e-15);
}

TEST(Camera, PolynomialMatchesDirectEvaluation) {
    const auto cam = CameraModel::polynomial({260.0, 0.0, -20.0}, {319.5, 239.5}, 640, 480, 160.0 * kPi / 180.0);
    for (double theta : {0.1, 0.5, 1.0, 1.3}) {
        EXPECT_NEAR(cam.radius(theta), 260.0 * theta - 20.0 * theta * theta * theta, 1e-12);
        // Recover theta with an independent bisection.
        const double r = cam.radius(theta);
        const double t = oracle_invert([&](double x) { return 260.0 * x - 20.0 * x * x * x; }, 0.0, 1.4, r);
        const Bearing b = cam.pixel_to_bearing({319.5 + r, 239.5});
        EXPECT_NEAR(std::atan2(b.x(), b.z()), t, 1e-11);
    }
}

TEST(Camera, RoundTripTenThousandPixels) {
    const std::vector<CameraModel> cams{
        default_fisheye_rig().cam1, pinhole_rig().cam1, polynomial_rig().cam1,
        CameraModel::equidistant(180.0, {330.2, 241.7}, 640, 480, 200.0 * kPi / 180.0)};
    std::mt19937_64 rng(7);
    for (const auto &cam : cams) {
        std::uniform_real_distribution<double> U(0.0, cam.width() - 1), V(0.0, cam.height() - 1);
        double worst = 0.0, worst_norm = 0.0, worst_azimuth = 0.0;
        int tested = 0;
        while (tested < 10000) {
            const Pixel p{U(rng), V(rng)};
            const auto b = cam.try_pixel_to_bearing(p);
            if (!b)
                continue;
            ++tested;
            const Pixel q = cam.bearing_to_pixel(*b);
            worst = std::max(worst, std::hypot(q.u - p.u, q.v - p.v));
            worst_norm = std::max(worst_norm, std::abs(b->norm() - 1.0));
            const double du = p.u - cam.center().u, dv = p.v - cam.center().v;
            if (std::hypot(du, dv) > 1.0) {
                double d = std::atan2(b->y(), b->x()) - std::atan2(dv, du);
                d = std::remainder(d, 2.0 * kPi);
                worst_azimuth = std::max(worst_azimuth, std::abs(d));
            }
        }
        EXPECT_LT(worst, 1e-9) << to_string(cam.kind());
        EXPECT_LT(worst_norm, 1e-12);
        EXPECT_LT(worst_azimuth, 1e-12);
    }
}

TEST(Camera, WideAngleRaysBehindTheCamera) {
    const auto cam = CameraModel::equidistant(100.0, {320.0, 240.0}, 640, 480, 200.0 * kPi / 180.0);
    const Bearing b = cam.pixel_to_bearing({320.0 + 100.0 * 1.7, 240.0});
    EXPECT_LT(b.z(), 0.0);
    const Pixel p = cam.bearing_to_pixel(b);
    EXPECT_NEAR(p.u, 490.0, 1e-9);
}

TEST(Camera, OutOfFovErrors) {
    const auto cam = default_fisheye_rig().cam1;
    try {
        cam.pixel_to_bearing({0.0, 0.0}); // image corner lies outside the 160 degree circle
        FAIL() << "expected OutOfFov";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfFov);
    }
    try {
        cam.bearing_to_pixel(Vec3(1.0, 0.0, 0.0));
        FAIL() << "expected OutOfFov";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfFov);
    }
    try {
        cam.pixel_to_bearing({std::nan(""), 10.0});
        FAIL() << "expected NonFinite";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFinite);
    }
}

TEST(Camera, JsonRoundTrip) {
    for (const auto &cam : {default_fisheye_rig().cam1, pinhole_rig().cam1, polynomial_rig().cam1}) {
        const auto j = camera_to_json(cam);
        const auto back = camera_from_json(j);
        EXPECT_EQ(back.kind(), cam.kind());
        EXPECT_EQ(back.width(), cam.width());
        EXPECT_NEAR(back.theta_max(), cam.theta_max(), 1e-15);
        EXPECT_NEAR(back.radius(0.7), cam.radius(0.7), 1e-9);
    }
    const auto dir = testkit::scratch_dir("camera_json");
    save_camera_model(dir / "cam.json", default_fisheye_rig().cam1);
    EXPECT_EQ(load_camera_model(dir / "cam.json").kind(), CameraKind::Equidistant);
}

TEST(Camera, InvalidConfigs) {
    nlohmann::json j = {{"kind", "equidistant"}, {"focal", -5.0}, {"cx", 320}, {"cy", 240},
                        {"width", 640},         {"height", 480}, {"theta_max_deg", 160}};
    try {
        camera_from_json(j);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidModel);
    }

    // r = 200 t - 100 t^3 turns over at t = 0.816 rad, inside the 160 degree field.
    nlohmann::json poly = {{"kind", "polynomial"}, {"poly_coeffs", {200.0, 0.0, -100.0}},
                           {"cx", 320},            {"cy", 240},
                           {"width", 640},         {"height", 480},
                           {"theta_max_deg", 160}};
    try {
        camera_from_json(poly);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidModel);
        EXPECT_NE(std::string(e.what()).find("theta"), std::string::npos);
    }

    try {
        camera_from_json(nlohmann::json{{"kind", "equidistant"}});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
    }

    const auto dir = testkit::scratch_dir("camera_bad");
    {
        std::ofstream(dir / "bad.json") << "{ not json";
    }
    try {
        load_camera_model(dir / "bad.json");
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
    }
}

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fishrect/distortion.hpp"
#include "fishrect/optimizer.hpp"
#include "fishrect/synth.hpp"

using namespace fishrect;

namespace {

const PlanarMap identity = [](const Pixel &p) -> std::optional<Pixel> { return p; };
const PlanarMap double_u = [](const Pixel &p) -> std::optional<Pixel> { return Pixel{2.0 * p.u, p.v}; };

PlanarMap fisheye_map(View view) {
    const auto rig = default_fisheye_rig();
    const auto m = initial_model(rig.cam1, rig.cam2, rig.pose);
    return [m, view](const Pixel &p) { return try_forward_map(m, view, p); };
}

} // namespace

TEST(Jacobian, LinearMaps) {
    const auto j = local_jacobian(identity, {10.0, 20.0}, 0.5);
    EXPECT_EQ(j.w1, Vec2(1.0, 0.0));
    EXPECT_EQ(j.w2, Vec2(0.0, 1.0));
    const auto s = local_jacobian(double_u, {10.0, 20.0}, 0.5);
    EXPECT_EQ(s.w1, Vec2(2.0, 0.0));
    EXPECT_EQ(s.w2, Vec2(0.0, 1.0));
}

TEST(Jacobian, StepConsistencyOnFisheyeMap) {
    const auto map = fisheye_map(View::First);
    for (const Pixel p : {Pixel{320.0, 240.0}, Pixel{100.0, 200.0}, Pixel{500.0, 60.0}}) {
        const auto a = local_jacobian(map, p, 1e-4), b = local_jacobian(map, p, 1e-5);
        const double scale = std::max(a.w1.norm(), a.w2.norm());
        EXPECT_LT((a.w1 - b.w1).norm() / scale, 1e-3);
        EXPECT_LT((a.w2 - b.w2).norm() / scale, 1e-3);
    }
}

TEST(Jacobian, StencilOutsideFov) {
    const auto map = fisheye_map(View::First);
    try {
        local_jacobian(map, {0.0, 0.0}, 0.5);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfFov);
    }
    EXPECT_FALSE(try_local_jacobian(map, {0.0, 0.0}, 0.5).has_value());
}

TEST(Losses, FormulaExamples) {
    const auto zero = sample_losses({Vec2(1, 0), Vec2(0, 1)});
    EXPECT_EQ(zero.area, 0.0);
    EXPECT_EQ(zero.ratio, 0.0);
    EXPECT_EQ(zero.skew, 0.0);

    const auto scaled = sample_losses({Vec2(2, 0), Vec2(0, 1)});
    EXPECT_DOUBLE_EQ(scaled.area, 1.0);
    EXPECT_DOUBLE_EQ(scaled.ratio, 1.0);
    EXPECT_DOUBLE_EQ(scaled.skew, 0.0);

    const auto sheared = sample_losses({Vec2(1, 0), Vec2(1, 1)});
    EXPECT_DOUBLE_EQ(sheared.skew, 1.0);
    EXPECT_DOUBLE_EQ(sheared.area, 0.0);
    EXPECT_NEAR(sheared.ratio, (1.0 - std::sqrt(2.0)) * (1.0 - std::sqrt(2.0)), 1e-15);
    EXPECT_NEAR(sheared.ratio, 0.17157, 1e-5);
}

TEST(Losses, RotationInvariance) {
    const JacobianColumns j{Vec2(1.3, 0.2), Vec2(-0.4, 0.9)};
    const auto base = sample_losses(j);
    for (double a : {0.3, 1.1, -2.0}) {
        Eigen::Matrix2d R;
        R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        const auto r = sample_losses({R * j.w1, R * j.w2});
        EXPECT_NEAR(r.area, base.area, 1e-14);
        EXPECT_NEAR(r.ratio, base.ratio, 1e-14);
        EXPECT_NEAR(r.skew, base.skew, 1e-14);
    }
}

TEST(Samples, GridLayout) {
    const auto s = select_samples(100, 100, 4, 10.0);
    ASSERT_EQ(s.size(), 4u);
    EXPECT_EQ(s[0].u, 10.0);
    EXPECT_EQ(s[0].v, 10.0);
    EXPECT_EQ(s[1].u, 90.0);
    EXPECT_EQ(s[1].v, 10.0);
    EXPECT_EQ(s[2].u, 10.0);
    EXPECT_EQ(s[2].v, 90.0);
    EXPECT_EQ(s[3].u, 90.0);
    EXPECT_EQ(s[3].v, 90.0);

    const auto a = select_samples(640, 480), b = select_samples(640, 480);
    ASSERT_EQ(a.size(), 500u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].u, b[i].u);
        EXPECT_EQ(a[i].v, b[i].v);
        EXPECT_GE(a[i].u, 2.0);
        EXPECT_LE(a[i].u, 638.0);
    }
    try {
        select_samples(10, 10, 4, 5.0);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidMargin);
    }
}

TEST(Total, IdentityIsExactlyZero) {
    const auto samples = select_samples(640, 480, 500);
    const auto r = total_distortion(identity, samples);
    EXPECT_EQ(r.total, 0.0);
    EXPECT_EQ(r.n_samples, 500);
    EXPECT_EQ(r.n_skipped, 0);
}

TEST(Total, UniformHorizontalScale) {
    const auto samples = select_samples(640, 480, 500);
    const auto r = total_distortion(double_u, samples);
    EXPECT_DOUBLE_EQ(r.total, 1.5 * 500);
    EXPECT_DOUBLE_EQ(r.mean(), 1.5);
}

TEST(Total, WeightedDecompositionAndSkips) {
    const auto map = fisheye_map(View::Second);
    const auto samples = select_samples(640, 480, 500);
    const DistortionWeights w{0.3, 0.8};
    const auto r = total_distortion(map, samples, w);
    EXPECT_NEAR(r.total, r.sum_area + 0.3 * r.sum_ratio + 0.8 * r.sum_skew, 1e-12 * r.total);
    EXPECT_EQ(r.n_samples + r.n_skipped, 500);
    EXPECT_GT(r.n_skipped, 0); // the image corners lie outside the fisheye circle
    EXPECT_GT(r.total, 0.0);

    const PlanarMap nothing = [](const Pixel &) -> std::optional<Pixel> { return std::nullopt; };
    try {
        total_distortion(nothing, samples);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::AllSamplesSkipped);
    }
}

TEST(Total, FiniteDifferenceStepAgreement) {
    // Compare on samples whose wider stencil stays in the FOV; a sample skipped
    // at one step but not the other is a sample-set change, not a step effect.
    for (View view : {View::First, View::Second}) {
        const auto map = fisheye_map(view);
        std::vector<Pixel> samples;
        for (const Pixel &p : select_samples(640, 480, 500))
            if (try_local_jacobian(map, p, 0.5) && try_local_jacobian(map, p, 0.05))
                samples.push_back(p);
        ASSERT_GT(samples.size(), 300u);
        const auto a = total_distortion(map, samples, {}, 0.5);
        const auto b = total_distortion(map, samples, {}, 0.05);
        EXPECT_LT(std::abs(a.total - b.total) / b.total, 1e-3);
    }
}

TEST(Total, DiscretizationStability) {
    // Radial lens-style warp; the fisheye map's FOV rim is not smooth at this scale.
    const PlanarMap smooth = [](const Pixel &p) -> std::optional<Pixel> {
        const double x = (p.u - 320.0) / 320.0, y = (p.v - 240.0) / 320.0;
        const double s = 1.0 + 0.2 * (x * x + y * y);
        return Pixel{320.0 + 320.0 * x * s, 240.0 + 320.0 * y * s};
    };
    const auto a = total_distortion(smooth, select_samples(640, 480, 500));
    const auto b = total_distortion(smooth, select_samples(640, 480, 1000));
    EXPECT_LT(std::abs(a.mean() - b.mean()) / b.mean(), 0.02);
}

TEST(Total, CsvReport) {
    const auto r = total_distortion(double_u, select_samples(100, 100, 4, 10.0));
    std::ostringstream os;
    write_distortion_csv(os, r);
    const std::string s = os.str();
    EXPECT_EQ(s.rfind("u,v,l_area,l_ratio,l_skew\n", 0), 0u);
    EXPECT_NE(s.find("10,10,1,1,0\n"), std::string::npos);
    EXPECT_NE(s.find("# total=6"), std::string::npos);
}

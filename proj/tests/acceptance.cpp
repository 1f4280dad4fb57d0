// Acceptance run: one PASS/FAIL line per criterion. Takes the CLI binary path
// as its only argument (needed for the determinism criterion).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "fishrect/distortion.hpp"
#include "fishrect/epipolar.hpp"
#include "fishrect/evaluation.hpp"
#include "fishrect/optimizer.hpp"
#include "fishrect/reconstruct.hpp"
#include "fishrect/synth.hpp"
#include "support.hpp"

using namespace fishrect;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

GroundTruthBundle bundle_for(const StereoRig &rig, std::uint64_t seed, double noise = 0.0) {
    RenderConfig cfg;
    cfg.noise_sigma = noise;
    cfg.seed = seed;
    return render_pair(generate_scene(rig, seed, 1000, 2.0, 20.0), rig, cfg);
}

Outcome epipolar_alignment() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rig = default_fisheye_rig();
    const auto s = select_samples(640, 480);

    const auto exact = bundle_for(rig, 0);
    const auto opt = optimize(rig.cam1, rig.cam2, rig.pose, exact.correspondences);
    const auto ev = evaluate_rectification(method_from_model("optimized", opt.model), exact.correspondences, s, s);

    const auto noisy = bundle_for(rig, 1, 0.5);
    RansacConfig rc;
    rc.threshold = 1e-2;
    const auto pose = estimate_relative_pose(noisy.correspondences, rig.cam1, rig.cam2, rc);
    const auto opt_n = optimize(rig.cam1, rig.cam2, pose, noisy.correspondences);
    const auto ev_n = evaluate_rectification(method_from_model("optimized", opt_n.model), noisy.correspondences, s, s);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const bool ok = ev.summary.n_correspondences >= 500 && ev.summary.rect_error_mean < 0.1 &&
                    ev.summary.rect_error_max < 0.1 && ev_n.summary.rect_error_mean < 1.0 && secs < 60.0;
    return {ok, "exact: n=" + std::to_string(ev.summary.n_correspondences) + " mean=" +
                    fmt(ev.summary.rect_error_mean) + " max=" + fmt(ev.summary.rect_error_max) +
                    " px; noisy+estimated pose: mean=" + fmt(ev_n.summary.rect_error_mean) + " px; " + fmt(secs) +
                    " s"};
}

Outcome distortion_reduction() {
    const auto s = select_samples(640, 480);
    const auto fish = default_fisheye_rig();
    const auto fb = bundle_for(fish, 0);
    const auto fo = optimize(fish.cam1, fish.cam2, fish.pose, fb.correspondences);
    const double d_opt = evaluate_rectification(method_from_model("optimized", fo.model), fb.correspondences, s, s)
                             .summary.distortion_total;
    const double d_persp =
        evaluate_rectification(build_baseline(BaselineKind::Perspective, fish.cam1, fish.cam2, fish.pose, 640, 480, s, s),
                               fb.correspondences, s, s)
            .summary.distortion_total;
    const double d_equi =
        evaluate_rectification(build_baseline(BaselineKind::Equidistant, fish.cam1, fish.cam2, fish.pose, 640, 480, s, s),
                               fb.correspondences, s, s)
            .summary.distortion_total;

    const auto poly = polynomial_rig();
    const auto pb = bundle_for(poly, 0);
    const auto po = optimize(poly.cam1, poly.cam2, poly.pose, pb.correspondences);
    const double p_opt = evaluate_rectification(method_from_model("optimized", po.model), pb.correspondences, s, s)
                             .summary.distortion_total;
    const double p_equi =
        evaluate_rectification(build_baseline(BaselineKind::Equidistant, poly.cam1, poly.cam2, poly.pose, 640, 480, s, s),
                               pb.correspondences, s, s)
            .summary.distortion_total;

    const bool ok = d_opt <= 0.8 * d_persp && p_opt <= p_equi;
    return {ok, "160deg: optimized=" + fmt(d_opt) + " perspective=" + fmt(d_persp) + " (ratio " +
                    fmt(d_opt / d_persp) + "), equidistant=" + fmt(d_equi) + " (reduction " +
                    fmt(100.0 * (1.0 - d_opt / d_equi)) + "%); polynomial: optimized=" + fmt(p_opt) +
                    " equidistant=" + fmt(p_equi)};
}

Outcome optimizer_monotonicity() {
    const auto rig = default_fisheye_rig();
    int bad = 0, max_iter = 0;
    double worst_ratio = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto b = bundle_for(rig, seed);
        OptimizerConfig cfg;
        cfg.random_init = true;
        cfg.seed = seed;
        const auto r = optimize(rig.cam1, rig.cam2, rig.pose, b.correspondences, cfg);
        bool ok = r.final_loss <= r.initial_loss && r.iterations <= 500 && check_monotone(r.model.psi_u) &&
                  check_monotone(r.model.psi_v);
        for (const auto &t : r.trace)
            ok = ok && check_monotone(t.psi_u) && check_monotone(t.psi_v);
        bad += !ok;
        max_iter = std::max(max_iter, r.iterations);
        worst_ratio = std::max(worst_ratio, r.final_loss / r.initial_loss);
    }
    return {bad == 0, "20 seeded random starts: violations=" + std::to_string(bad) + " max iterations=" +
                          std::to_string(max_iter) + " worst final/initial=" + fmt(worst_ratio)};
}

Outcome multiplier_pair_suite() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(-2.0, 2.0), mag(0.3, 2.0);
    std::normal_distribution<double> N(0.0, 1.0);
    const auto signed_mag = [&] { return (U(rng) < 0 ? -1.0 : 1.0) * mag(rng); };
    double worst_pair = 0.0;
    for (int i = 0; i < 1000; ++i) {
        Eigen::Matrix2d A2;
        do {
            A2 << U(rng), U(rng), U(rng), U(rng);
        } while (std::abs(A2.determinant()) < 0.1);
        const auto p = make_multiplier_pair(signed_mag(), Eigen::RowVector2d(U(rng), U(rng)), A2, signed_mag(),
                                            Eigen::RowVector2d(U(rng), U(rng)), signed_mag());
        worst_pair = std::max(worst_pair, verify_multiplier_pair(p.A, p.A_prime));
    }
    double best_random = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 1000; ++i) {
        Mat3 A, B;
        for (int k = 0; k < 9; ++k) {
            A(k / 3, k % 3) = N(rng);
            B(k / 3, k % 3) = N(rng);
        }
        best_random = std::min(best_random, verify_multiplier_pair(A, B));
    }
    double worst_inv = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Mat3 R1 = rotation_from_axis_angle(Vec3(N(rng), N(rng), N(rng)));
        const Mat3 R2 = rotation_from_axis_angle(Vec3(N(rng), N(rng), N(rng)));
        const Mat3 Rx = rotation_from_axis_angle(Vec3(U(rng), 0.0, 0.0));
        worst_inv = std::max(worst_inv,
                             (essential_from_rotations(R1 * Rx, R2 * Rx) - essential_from_rotations(R1, R2)).norm());
        worst_inv = std::max(worst_inv, (essential_from_rotations(Rx, Rx) - canonical_essential()).norm());
    }
    const bool ok = worst_pair < 1e-9 && best_random > 1e-3 && worst_inv < 1e-12;
    return {ok, "constructed max residual=" + fmt(worst_pair) + ", random min residual=" + fmt(best_random) +
                    ", X-rotation invariance defect=" + fmt(worst_inv)};
}

Outcome round_trips() {
    std::mt19937_64 rng(5);
    const auto rig = default_fisheye_rig();
    std::uniform_real_distribution<double> U(0.0, 639.0), V(0.0, 479.0);
    double cam_err = 0.0;
    for (int n = 0; n < 10000;) {
        const Pixel p{U(rng), V(rng)};
        const auto b = rig.cam1.try_pixel_to_bearing(p);
        if (!b)
            continue;
        const Pixel q = rig.cam1.bearing_to_pixel(*b);
        cam_err = std::max(cam_err, std::hypot(q.u - p.u, q.v - p.v));
        ++n;
    }
    const auto m = initial_model(rig.cam1, rig.cam2, rig.pose);
    double map_err = 0.0;
    for (int n = 0, tries = 0; n < 10000 && tries < 100000; ++tries) {
        const Pixel q{U(rng), V(rng)};
        const View view = tries % 2 ? View::First : View::Second;
        const auto p = try_inverse_map(m, view, q);
        if (!p)
            continue;
        const auto back = try_forward_map(m, view, *p);
        map_err = std::max(map_err, back ? std::hypot(back->u - q.u, back->v - q.v) : 1e9);
        ++n;
    }
    std::uniform_real_distribution<double> B(-std::numbers::pi + 1e-9, std::numbers::pi), G(-1.5, 1.5);
    double ang_err = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const AngleCoords a{B(rng), G(rng)};
        const auto back = bearing_to_angles(angles_to_bearing(a));
        ang_err = std::max({ang_err, std::abs(back.beta - a.beta), std::abs(back.gamma - a.gamma)});
    }
    const bool ok = cam_err < 1e-9 && map_err < 5e-2 && ang_err < 1e-12;
    return {ok, "camera=" + fmt(cam_err) + " px, H(H^-1)=" + fmt(map_err) + " px, angles=" + fmt(ang_err) + " rad"};
}

Outcome reconstruction() {
    const auto rig = default_fisheye_rig();
    const auto m = optimize(rig.cam1, rig.cam2, rig.pose, bundle_for(rig, 0).correspondences).model;
    // A few scene points fall outside the rectified angle domain; draw extra and use the first 1000.
    const auto b = render_pair(generate_scene(rig, 6, 1100, 2.0, 20.0), rig, RenderConfig{});
    double worst = 0.0, lin = 0.0, shift = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < b.exact_correspondences.size() && n < 1000; ++i) {
        const auto &c = b.exact_correspondences[i];
        const auto q1 = try_forward_map(m, View::First, c.first), q2 = try_forward_map(m, View::Second, c.second);
        if (!q1 || !q2)
            continue;
        const Vec3 truth = m.rotations.R1.transpose() * b.points[i].position;
        const double d = q1->u - q2->u;
        const Vec3 P = disparity_to_point(m, q1->u, q1->v, d, rig.pose.baseline);
        const Vec3 P2 = disparity_to_point(m, q1->u, q1->v, d, 2.0 * rig.pose.baseline);
        worst = std::max(worst, (P - truth).norm() / truth.norm());
        lin = std::max(lin, (P2 - 2.0 * P).norm() / P.norm());
        const double g1 = invert_projection(m.psi_u, q1->u), g2 = invert_projection(m.psi_u, q1->u - d);
        const double X2 = rig.pose.baseline * std::tan(g2) / (std::tan(g1) - std::tan(g2));
        shift = std::max(shift, std::abs(P.x() - X2 - rig.pose.baseline) / std::max(1.0, std::abs(P.x())));
        ++n;
    }
    const bool ok = n == 1000 && worst < 1e-6 && lin < 1e-12 && shift < 1e-12;
    return {ok, std::to_string(n) + " points: max relative error=" + fmt(worst) + ", linearity=" + fmt(lin) +
                    ", X1-X2-b=" + fmt(shift)};
}

Outcome jacobian_consistency() {
    const auto rig = default_fisheye_rig();
    const auto m = initial_model(rig.cam1, rig.cam2, rig.pose);
    const auto s = select_samples(640, 480, 500);
    double worst = 0.0;
    for (View view : {View::First, View::Second}) {
        const PlanarMap map = [&m, view](const Pixel &p) { return try_forward_map(m, view, p); };
        std::vector<Pixel> common;
        for (const Pixel &p : s)
            if (try_local_jacobian(map, p, 0.5) && try_local_jacobian(map, p, 0.05))
                common.push_back(p);
        const double a = total_distortion(map, common, {}, 0.5).total;
        const double b = total_distortion(map, common, {}, 0.05).total;
        worst = std::max(worst, std::abs(a - b) / std::abs(b));
    }
    const PlanarMap identity = [](const Pixel &p) -> std::optional<Pixel> { return p; };
    const double id = total_distortion(identity, s).total;
    return {worst < 1e-3 && id == 0.0, "h vs h/10 relative difference=" + fmt(worst) + ", identity total=" + fmt(id)};
}

Outcome perspective_support() {
    const auto rig = pinhole_rig();
    const auto b = bundle_for(rig, 0);
    const auto s = select_samples(640, 480);
    const auto r = optimize(rig.cam1, rig.cam2, rig.pose, b.correspondences);
    const auto ev = evaluate_rectification(method_from_model("optimized", r.model), b.correspondences, s, s);
    const double persp =
        evaluate_rectification(build_baseline(BaselineKind::Perspective, rig.cam1, rig.cam2, rig.pose, 640, 480, s, s),
                               b.correspondences, s, s)
            .summary.distortion_total;
    const double equi =
        evaluate_rectification(build_baseline(BaselineKind::Equidistant, rig.cam1, rig.cam2, rig.pose, 640, 480, s, s),
                               b.correspondences, s, s)
            .summary.distortion_total;
    const double d = ev.summary.distortion_total;
    const bool ok = ev.summary.rect_error_max < 0.1 && d <= persp && d <= equi;
    return {ok, "rect_error_max=" + fmt(ev.summary.rect_error_max) + " px; distortion optimized=" + fmt(d) +
                    " perspective=" + fmt(persp) + " equidistant=" + fmt(equi)};
}

Outcome determinism(const std::string &cli) {
    const auto dir = testkit::scratch_dir("acceptance_determinism");
    for (const std::string run : {"a", "b"}) {
        const std::string out = (dir / run).string(), bdir = out + "/bundle/";
        if (testkit::run_command(cli + " synth --seed 7 --out " + bdir) != 0 ||
            testkit::run_command(cli + " optimize --seed 7 --cam1 " + bdir + "cam1.json --cam2 " + bdir +
                                 "cam2.json --pose " + bdir + "pose.json --corrs " + bdir + "corrs.csv --out " + out +
                                 "/opt") != 0 ||
            testkit::run_command(cli + " rectify --model " + out + "/opt/model.json --left " + bdir +
                                 "left.png --right " + bdir + "right.png --out " + out + "/rect") != 0)
            return {false, "a subcommand failed"};
    }
    int compared = 0, differing = 0;
    for (const char *f : {"bundle/left.png", "bundle/right.png", "bundle/corrs.csv", "bundle/pose.json",
                          "bundle/cam1.json", "bundle/cam2.json", "bundle/points.ply", "opt/model.json",
                          "opt/trace.csv", "rect/left_rect.png", "rect/right_rect.png", "rect/left.rlut",
                          "rect/right.rlut"}) {
        ++compared;
        differing += !testkit::files_identical(dir / "a" / f, dir / "b" / f);
    }
    return {differing == 0, std::to_string(compared) + " files compared, " + std::to_string(differing) + " differ"};
}

} // namespace

int main(int argc, char **argv) {
    if (argc < 2) {
        std::cerr << "usage: fishrect_acceptance <path-to-fishrect-cli>\n";
        return 2;
    }
    const std::string cli = argv[1];
    const std::pair<const char *, std::function<Outcome()>> criteria[] = {
        {"AC1 epipolar alignment", epipolar_alignment},
        {"AC2 distortion reduction", distortion_reduction},
        {"AC3 optimizer monotonicity and feasibility", optimizer_monotonicity},
        {"AC4 multiplier pairs and X-rotation invariance", multiplier_pair_suite},
        {"AC5 camera and map round trips", round_trips},
        {"AC6 reconstruction round trip", reconstruction},
        {"AC7 jacobian consistency", jacobian_consistency},
        {"AC8 perspective-image support", perspective_support},
        {"AC9 determinism", [&cli] { return determinism(cli); }},
    };
    int failed = 0;
    for (const auto &[name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << " | " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}

// fishrect: fisheye stereo rectification pipeline.
//
//   synth          write a synthetic ground-truth bundle
//   estimate-pose  correspondences -> pose.json
//   optimize       cameras + pose + correspondences -> model.json, trace.csv
//   rectify        model + images -> rectified PNGs and backward LUTs
//   evaluate       model and baselines -> summary.csv, per-sample distortion
//   match          rectified pair -> disparity.pfm
//   reconstruct    disparity + model -> cloud.ply

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fishrect/camera.hpp"
#include "fishrect/epipolar.hpp"
#include "fishrect/evaluation.hpp"
#include "fishrect/image.hpp"
#include "fishrect/optimizer.hpp"
#include "fishrect/reconstruct.hpp"
#include "fishrect/rectmodel.hpp"
#include "fishrect/synth.hpp"
#include "fishrect/warper.hpp"

namespace fs = std::filesystem;
using namespace fishrect;

namespace {

struct Options {
    std::string cam1, cam2, pose, corrs, model, left, right, out, disparity;
    int samples = 500;
    double alpha1 = 0.5, alpha2 = 0.5, epsilon = 1.0;
    std::uint64_t seed = 0;
    std::optional<double> baseline_metric;

    // synth
    std::string rig = "fisheye";
    std::string mode = "dots";
    int points = 1000;
    double depth_min = 2.0, depth_max = 20.0, noise = 0.0;

    // estimate-pose
    int ransac_iterations = 1000;
    double ransac_threshold = 1e-3;

    // optimize
    int max_iters = 500;
    int width = 0, height = 0;

    // evaluate
    std::vector<std::string> baselines{"perspective", "equidistant"};

    // match
    int window = 9, max_disparity = 64;
};

fs::path out_dir(const Options &o) {
    const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

void require(const std::string &value, const char *flag) {
    if (value.empty())
        throw Error(ErrorCode::IoError, std::string("missing required option ") + flag);
}

DistortionWeights weights(const Options &o) { return {o.alpha1, o.alpha2}; }

void run_synth(const Options &o) {
    const StereoRig rig = [&] {
        if (o.rig == "fisheye")
            return default_fisheye_rig();
        if (o.rig == "pinhole")
            return pinhole_rig();
        if (o.rig == "polynomial")
            return polynomial_rig();
        throw Error(ErrorCode::DomainError, "unknown rig '" + o.rig + "'");
    }();

    SyntheticScene scene = generate_scene(rig, o.seed, o.points, o.depth_min, o.depth_max);
    RenderConfig cfg;
    cfg.noise_sigma = o.noise;
    cfg.seed = o.seed;
    if (o.mode == "checkerboard") {
        cfg.mode = RenderMode::Checkerboard;
        scene.planes.push_back(centered_checkerboard(rig, 2.0, 0.25, 12, 8));
    } else if (o.mode != "dots") {
        throw Error(ErrorCode::DomainError, "unknown render mode '" + o.mode + "'");
    }
    const auto bundle = render_pair(scene, rig, cfg);
    const fs::path dir = out_dir(o);
    write_bundle(dir, bundle);
    std::cout << "wrote " << bundle.correspondences.size() << " correspondences to " << dir.string() << '\n';
}

void run_estimate_pose(const Options &o) {
    require(o.cam1, "--cam1");
    require(o.cam2, "--cam2");
    require(o.corrs, "--corrs");
    const auto cam1 = load_camera_model(o.cam1);
    const auto cam2 = load_camera_model(o.cam2);
    const auto corrs = load_correspondences(o.corrs);
    RansacConfig rc;
    rc.iterations = o.ransac_iterations;
    rc.threshold = o.ransac_threshold;
    rc.seed = o.seed;
    const auto pose = estimate_relative_pose(corrs, cam1, cam2, rc);
    const fs::path path = out_dir(o) / "pose.json";
    save_pose(path, pose);
    std::cout << "wrote " << path.string() << '\n';
}

void run_optimize(const Options &o) {
    require(o.cam1, "--cam1");
    require(o.cam2, "--cam2");
    require(o.pose, "--pose");
    require(o.corrs, "--corrs");
    const auto cam1 = load_camera_model(o.cam1);
    const auto cam2 = load_camera_model(o.cam2);
    const auto pose = load_pose(o.pose);
    const auto corrs = load_correspondences(o.corrs);

    OptimizerConfig cfg;
    cfg.weights = weights(o);
    cfg.n_samples = o.samples;
    cfg.epsilon = o.epsilon;
    cfg.max_iters = o.max_iters;
    cfg.out_width = o.width;
    cfg.out_height = o.height;
    cfg.seed = o.seed;
    const auto result = optimize(cam1, cam2, pose, corrs, cfg);

    const fs::path dir = out_dir(o);
    save_model(dir / "model.json", result.model);
    std::ofstream trace(dir / "trace.csv");
    if (!trace)
        throw Error(ErrorCode::IoError, "cannot write " + (dir / "trace.csv").string());
    write_trace_csv(trace, result.trace);
    std::cout << "loss " << result.initial_loss << " -> " << result.final_loss << " in " << result.iterations
              << " iterations; max row misalignment " << result.epipolar_residual_max << " px ("
              << result.epipolar_outliers << " outliers)\n";
}

void run_rectify(const Options &o) {
    require(o.model, "--model");
    require(o.left, "--left");
    require(o.right, "--right");
    const auto model = load_model(o.model);
    const fs::path dir = out_dir(o);
    const struct {
        View view;
        const std::string &src;
        const char *stem;
    } jobs[] = {{View::First, o.left, "left"}, {View::Second, o.right, "right"}};
    for (const auto &job : jobs) {
        const auto lut = build_lut(model, job.view);
        const auto img = read_image(job.src);
        write_image(dir / (std::string(job.stem) + "_rect.png"), warp_image(img, lut));
        save_lut(dir / (std::string(job.stem) + ".rlut"), lut);
    }
    std::cout << "wrote rectified pair to " << dir.string() << '\n';
}

void run_evaluate(const Options &o) {
    require(o.corrs, "--corrs");
    std::optional<RectificationModel> model;
    if (!o.model.empty())
        model = load_model(o.model);
    if (!model) {
        require(o.cam1, "--cam1");
        require(o.cam2, "--cam2");
    }
    const CameraModel cam1 = o.cam1.empty() ? model->cam1 : load_camera_model(o.cam1);
    const CameraModel cam2 = o.cam2.empty() ? model->cam2 : load_camera_model(o.cam2);
    const auto corrs = load_correspondences(o.corrs);
    const int out_w = model ? model->out_width : (o.width > 0 ? o.width : cam1.width());
    const int out_h = model ? model->out_height : (o.height > 0 ? o.height : cam1.height());
    const auto s1 = select_samples(cam1.width(), cam1.height(), o.samples);
    const auto s2 = select_samples(cam2.width(), cam2.height(), o.samples);
    const auto w = weights(o);

    std::vector<RectificationMethod> methods;
    if (model)
        methods.push_back(method_from_model("optimized", *model));
    if (!o.baselines.empty()) {
        require(o.pose, "--pose");
        const auto pose = load_pose(o.pose);
        for (const auto &b : o.baselines) {
            if (b == "perspective") {
                try {
                    methods.push_back(build_baseline(BaselineKind::Perspective, cam1, cam2, pose, out_w, out_h, s1,
                                                     s2, w));
                } catch (const Error &e) {
                    if (e.code() != ErrorCode::FovTooWide)
                        throw;
                    std::cerr << "skipping perspective baseline: " << e.what() << '\n';
                }
            } else if (b == "equidistant") {
                methods.push_back(
                    build_baseline(BaselineKind::Equidistant, cam1, cam2, pose, out_w, out_h, s1, s2, w));
            } else {
                throw Error(ErrorCode::DomainError, "unknown baseline '" + b + "'");
            }
        }
    }
    if (methods.empty())
        throw Error(ErrorCode::DomainError, "nothing to evaluate: pass --model and/or --baselines");

    const fs::path dir = out_dir(o);
    std::vector<EvaluationSummary> rows;
    for (const auto &m : methods) {
        const auto ev = evaluate_rectification(m, corrs, s1, s2, w);
        rows.push_back(ev.summary);
        for (const auto &[report, tag] : {std::pair{&ev.first, "1"}, std::pair{&ev.second, "2"}}) {
            std::ofstream f(dir / ("distortion_" + m.name + "_cam" + tag + ".csv"));
            if (!f)
                throw Error(ErrorCode::IoError, "cannot write per-sample distortion");
            write_distortion_csv(f, *report);
        }
    }
    std::ofstream summary(dir / "summary.csv");
    if (!summary)
        throw Error(ErrorCode::IoError, "cannot write summary.csv");
    write_summary_csv(summary, rows);
    write_summary_csv(std::cout, rows);
}

void run_match(const Options &o) {
    require(o.left, "--left");
    require(o.right, "--right");
    BlockMatchConfig cfg;
    cfg.window = o.window;
    cfg.max_disparity = o.max_disparity;
    const auto disp = block_match(read_image(o.left), read_image(o.right), cfg);
    const fs::path path = out_dir(o) / "disparity.pfm";
    save_pfm(path, disp);
    std::cout << "wrote " << path.string() << '\n';
}

void run_reconstruct(const Options &o) {
    require(o.disparity, "--disparity");
    require(o.model, "--model");
    const auto model = load_model(o.model);
    const auto disp = load_pfm(o.disparity);
    double baseline = 1.0;
    if (o.baseline_metric)
        baseline = *o.baseline_metric;
    else if (!o.pose.empty())
        baseline = load_pose(o.pose).baseline;
    std::optional<RasterImage> color;
    if (!o.left.empty())
        color = read_image(o.left);
    const auto cloud = reconstruct_cloud(disp, model, baseline, color ? &*color : nullptr);
    const fs::path path = out_dir(o) / "cloud.ply";
    save_ply(path, cloud, color.has_value());
    std::cout << "wrote " << cloud.size() << " points to " << path.string() << '\n';
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Fisheye stereo rectification with distortion-minimizing projections"};
    app.require_subcommand(1);
    Options o;

    const auto common = [&o](CLI::App *sub) {
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    };
    const auto cameras = [&o](CLI::App *sub) {
        sub->add_option("--cam1", o.cam1, "Camera 1 JSON");
        sub->add_option("--cam2", o.cam2, "Camera 2 JSON");
    };
    const auto loss = [&o](CLI::App *sub) {
        sub->add_option("--samples", o.samples, "Distortion samples per image")->capture_default_str();
        sub->add_option("--alpha1", o.alpha1, "Aspect-ratio weight")->capture_default_str();
        sub->add_option("--alpha2", o.alpha2, "Skew weight")->capture_default_str();
        sub->add_option("--width", o.width, "Rectified image width (default: camera 1)");
        sub->add_option("--height", o.height, "Rectified image height (default: camera 1)");
    };

    auto *synth = app.add_subcommand("synth", "Write a synthetic ground-truth bundle");
    common(synth);
    synth->add_option("--rig", o.rig, "fisheye | pinhole | polynomial")->capture_default_str();
    synth->add_option("--mode", o.mode, "dots | checkerboard")->capture_default_str();
    synth->add_option("--points", o.points, "Scene points")->capture_default_str();
    synth->add_option("--depth-min", o.depth_min)->capture_default_str();
    synth->add_option("--depth-max", o.depth_max)->capture_default_str();
    synth->add_option("--noise", o.noise, "Pixel noise sigma on correspondences")->capture_default_str();

    auto *est = app.add_subcommand("estimate-pose", "Estimate the relative pose from correspondences");
    common(est);
    cameras(est);
    est->add_option("--corrs", o.corrs, "Correspondence CSV");
    est->add_option("--ransac-iterations", o.ransac_iterations)->capture_default_str();
    est->add_option("--ransac-threshold", o.ransac_threshold, "Angular inlier threshold (rad)")
        ->capture_default_str();

    auto *opt = app.add_subcommand("optimize", "Optimize the rectification model");
    common(opt);
    cameras(opt);
    loss(opt);
    opt->add_option("--pose", o.pose, "Pose JSON");
    opt->add_option("--corrs", o.corrs, "Correspondence CSV");
    opt->add_option("--epsilon", o.epsilon, "Row alignment tolerance (px)")->capture_default_str();
    opt->add_option("--max-iters", o.max_iters)->capture_default_str();

    auto *rect = app.add_subcommand("rectify", "Warp an image pair with a model");
    common(rect);
    rect->add_option("--model", o.model, "Model JSON");
    rect->add_option("--left", o.left, "Camera 1 image");
    rect->add_option("--right", o.right, "Camera 2 image");

    auto *eval = app.add_subcommand("evaluate", "Compare a model against baseline rectifications");
    common(eval);
    cameras(eval);
    loss(eval);
    eval->add_option("--model", o.model, "Model JSON");
    eval->add_option("--pose", o.pose, "Pose JSON (for baselines)");
    eval->add_option("--corrs", o.corrs, "Correspondence CSV");
    eval->add_option("--baselines", o.baselines, "perspective and/or equidistant")->delimiter(',')
        ->capture_default_str();

    auto *match = app.add_subcommand("match", "Block-match a rectified pair");
    common(match);
    match->add_option("--left", o.left, "Rectified left image");
    match->add_option("--right", o.right, "Rectified right image");
    match->add_option("--window", o.window)->capture_default_str();
    match->add_option("--max-disparity", o.max_disparity)->capture_default_str();

    auto *rec = app.add_subcommand("reconstruct", "Triangulate a disparity map");
    common(rec);
    rec->add_option("--disparity", o.disparity, "PFM disparity map");
    rec->add_option("--model", o.model, "Model JSON");
    rec->add_option("--left", o.left, "Rectified left image for colours");
    rec->add_option("--pose", o.pose, "Pose JSON (baseline length)");
    rec->add_option("--baseline-metric", o.baseline_metric, "Baseline length in scene units");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth)
            run_synth(o);
        else if (*est)
            run_estimate_pose(o);
        else if (*opt)
            run_optimize(o);
        else if (*rect)
            run_rectify(o);
        else if (*eval)
            run_evaluate(o);
        else if (*match)
            run_match(o);
        else if (*rec)
            run_reconstruct(o);
    } catch (const Error &e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return is_numerical_failure(e.code()) ? 3 : 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

#include "fishrect/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "io_util.hpp"

namespace fishrect {

RectificationMethod method_from_model(std::string name, const RectificationModel &m) {
    return {std::move(name), [m](View view, const Pixel &p) { return try_forward_map(m, view, p); }};
}

RectificationModel equidistant_baseline_model(const CameraModel &cam1, const CameraModel &cam2,
                                              const RelativePose &pose, int out_width, int out_height) {
    const double th = default_theta_half(cam1, cam2);
    const double f = std::min(out_width, out_height) / (2.0 * th);
    CubicProjection pu{{0.5 * out_width, f, 0.0, 0.0}, th};
    CubicProjection pv{{0.5 * out_height, f, 0.0, 0.0}, th};
    return RectificationModel{rectifying_rotations(pose), pu, pv, cam1, cam2, out_width, out_height};
}

namespace {

RectificationMethod pinhole_method(const CameraModel &cam1, const CameraModel &cam2, const RectifyingRotations &rot,
                                   double f, int out_width, int out_height) {
    return {"perspective", [=](View view, const Pixel &p) -> std::optional<Pixel> {
                const CameraModel &cam = view == View::First ? cam1 : cam2;
                const Mat3 &R = view == View::First ? rot.R1 : rot.R2;
                const auto b = cam.try_pixel_to_bearing(p);
                if (!b)
                    return std::nullopt;
                const Vec3 r = R.transpose() * *b;
                if (!(r.z() > 1e-9))
                    return std::nullopt;
                return Pixel{f * r.x() / r.z() + 0.5 * out_width, f * r.y() / r.z() + 0.5 * out_height};
            }};
}

double method_distortion(const RectificationMethod &method, std::span<const Pixel> s1, std::span<const Pixel> s2,
                         const DistortionWeights &weights) {
    double total = 0.0;
    for (View view : {View::First, View::Second}) {
        const PlanarMap map = [&method, view](const Pixel &p) { return method.forward(view, p); };
        try {
            total += total_distortion(map, view == View::First ? s1 : s2, weights).total;
        } catch (const Error &e) {
            if (e.code() != ErrorCode::AllSamplesSkipped)
                throw;
        }
    }
    return total;
}

} // namespace

RectificationMethod perspective_baseline(const CameraModel &cam1, const CameraModel &cam2, const RelativePose &pose,
                                         int out_width, int out_height, std::span<const Pixel> samples1,
                                         std::span<const Pixel> samples2, const DistortionWeights &weights,
                                         double *chosen_focal) {
    if (cam1.theta_max() >= std::numbers::pi || cam2.theta_max() >= std::numbers::pi)
        throw Error(ErrorCode::FovTooWide, "a perspective image cannot cover a field of view of 180 degrees or more");
    const auto rot = rectifying_rotations(pose);
    const double span = std::min(out_width, out_height);
    constexpr int kGrid = 121;
    double best_f = span, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kGrid; ++i) {
        // Focal lengths from span/100 to 10*span.
        const double f = span * std::pow(10.0, -2.0 + 3.0 * i / (kGrid - 1));
        const double d = method_distortion(pinhole_method(cam1, cam2, rot, f, out_width, out_height), samples1,
                                           samples2, weights);
        if (d < best) {
            best = d;
            best_f = f;
        }
    }
    if (chosen_focal)
        *chosen_focal = best_f;
    return pinhole_method(cam1, cam2, rot, best_f, out_width, out_height);
}

RectificationMethod build_baseline(BaselineKind kind, const CameraModel &cam1, const CameraModel &cam2,
                                   const RelativePose &pose, int out_width, int out_height,
                                   std::span<const Pixel> samples1, std::span<const Pixel> samples2,
                                   const DistortionWeights &weights) {
    if (kind == BaselineKind::Perspective)
        return perspective_baseline(cam1, cam2, pose, out_width, out_height, samples1, samples2, weights);
    return method_from_model("equidistant", equidistant_baseline_model(cam1, cam2, pose, out_width, out_height));
}

Evaluation evaluate_rectification(const RectificationMethod &method, std::span<const Correspondence> corrs,
                                  std::span<const Pixel> samples1, std::span<const Pixel> samples2,
                                  const DistortionWeights &weights, double h) {
    Evaluation ev;
    ev.summary.method_name = method.name;

    double sum = 0.0;
    for (const auto &c : corrs) {
        const auto q1 = method.forward(View::First, c.first);
        const auto q2 = method.forward(View::Second, c.second);
        if (!q1 || !q2)
            continue;
        const double dv = std::abs(q1->v - q2->v);
        sum += dv;
        ev.summary.rect_error_max = std::max(ev.summary.rect_error_max, dv);
        ++ev.summary.n_correspondences;
    }
    if (ev.summary.n_correspondences > 0)
        ev.summary.rect_error_mean = sum / ev.summary.n_correspondences;

    const auto report = [&](View view, std::span<const Pixel> samples) {
        const PlanarMap map = [&method, view](const Pixel &p) { return method.forward(view, p); };
        try {
            return total_distortion(map, samples, weights, h);
        } catch (const Error &e) {
            if (e.code() != ErrorCode::AllSamplesSkipped)
                throw;
            DistortionReport empty;
            empty.n_skipped = static_cast<int>(samples.size());
            return empty;
        }
    };
    ev.first = report(View::First, samples1);
    ev.second = report(View::Second, samples2);
    ev.summary.distortion_total = ev.first.total + ev.second.total;
    ev.summary.n_samples = ev.first.n_samples + ev.second.n_samples;
    if (ev.summary.n_samples > 0)
        ev.summary.distortion_mean = ev.summary.distortion_total / ev.summary.n_samples;
    return ev;
}

void write_summary_csv(std::ostream &out, std::span<const EvaluationSummary> rows) {
    out << "method,rect_error_mean,rect_error_max,distortion_total,distortion_mean,n_correspondences,n_samples\n";
    for (const auto &r : rows) {
        out << r.method_name << ',' << detail::format_double(r.rect_error_mean) << ','
            << detail::format_double(r.rect_error_max) << ',' << detail::format_double(r.distortion_total) << ','
            << detail::format_double(r.distortion_mean) << ',' << r.n_correspondences << ',' << r.n_samples << '\n';
    }
}

} // namespace fishrect

#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "fishrect/distortion.hpp"
#include "fishrect/epipolar.hpp"
#include "fishrect/rectmodel.hpp"

namespace fishrect {

/// Any source-to-rectified pixel map pair, model-based or not.
struct RectificationMethod {
    std::string name;
    std::function<std::optional<Pixel>(View, const Pixel &)> forward;
};

RectificationMethod method_from_model(std::string name, const RectificationModel &m);

enum class BaselineKind { Perspective, Equidistant };

/// Equidistant-projection model: psi(t) = out/2 + f t on both axes with the
/// largest f that keeps +-theta_half inside the output image.
RectificationModel equidistant_baseline_model(const CameraModel &cam1, const CameraModel &cam2,
                                              const RelativePose &pose, int out_width, int out_height);

/// Conventional pinhole rectification u = f x/z + w/2, v = f y/z + h/2 in the
/// rectified frames. The focal length minimizes distortion on the samples over
/// a logarithmic grid. Throws FovTooWide if either camera sees 180 degrees or more.
RectificationMethod perspective_baseline(const CameraModel &cam1, const CameraModel &cam2, const RelativePose &pose,
                                         int out_width, int out_height, std::span<const Pixel> samples1,
                                         std::span<const Pixel> samples2, const DistortionWeights &weights = {},
                                         double *chosen_focal = nullptr);

RectificationMethod build_baseline(BaselineKind kind, const CameraModel &cam1, const CameraModel &cam2,
                                   const RelativePose &pose, int out_width, int out_height,
                                   std::span<const Pixel> samples1, std::span<const Pixel> samples2,
                                   const DistortionWeights &weights = {});

struct EvaluationSummary {
    std::string method_name;
    double rect_error_mean = 0.0;
    double rect_error_max = 0.0;
    double distortion_total = 0.0;
    double distortion_mean = 0.0;
    int n_correspondences = 0;
    int n_samples = 0;
};

struct Evaluation {
    EvaluationSummary summary;
    DistortionReport first;
    DistortionReport second;
};

/// Row misalignment over correspondences mapped in both views, and distortion
/// summed over both views' sample lists. Methods compared with each other
/// must receive the same samples and correspondences.
Evaluation evaluate_rectification(const RectificationMethod &method, std::span<const Correspondence> corrs,
                                  std::span<const Pixel> samples1, std::span<const Pixel> samples2,
                                  const DistortionWeights &weights = {}, double h = 0.5);

void write_summary_csv(std::ostream &out, std::span<const EvaluationSummary> rows);

} // namespace fishrect

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fishrect/distortion.hpp"
#include "fishrect/epipolar.hpp"
#include "fishrect/rectmodel.hpp"

namespace fishrect {

struct OptimizerConfig {
    DistortionWeights weights;
    int n_samples = 500;
    /// Relaxed epipolar tolerance in rectified pixels.
    double epsilon = 1.0;
    int n_control_points = 33;
    int max_iters = 500;
    double fd_step = 0.5;
    double barrier_initial = 1e-3;
    double barrier_decay = 0.1;
    double barrier_final = 1e-9;
    /// Correspondences within epsilon at the start must be at least this fraction.
    double min_epipolar_ratio = 0.5;
    /// Zero selects the source dimensions of camera 1.
    int out_width = 0;
    int out_height = 0;
    /// Projection domain half-width for both axes. Zero selects
    /// default_half_angles() per axis.
    double theta_half = 0.0;
    /// Start from a seeded random monotone model instead of the linear one.
    bool random_init = false;
    std::uint64_t seed = 0;
};

struct TraceEntry {
    int iter = 0;
    double loss = 0.0;
    double barrier_weight = 0.0;
    CubicProjection psi_u;
    CubicProjection psi_v;
};

struct OptimizeResult {
    RectificationModel model;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int iterations = 0;
    /// Largest |v1^ - v2^| over the epsilon-constrained correspondences.
    double epipolar_residual_max = 0.0;
    /// Correspondences already beyond epsilon at the start (left unconstrained).
    int epipolar_outliers = 0;
    /// Correspondences outside a field of view or projection domain.
    int epipolar_unmapped = 0;
    bool converged = false;
    int n_samples_used = 0;
    std::vector<TraceEntry> trace;
};

/// Linear, equidistant-like projections: c0 = out/2, c1 = out / (2 theta_half).
std::pair<CubicProjection, CubicProjection> initialize_coefficients(const CameraModel &cam1, const CameraModel &cam2,
                                                                    int out_width, int out_height,
                                                                    double theta_half = 0.0);

/// Model with the rectifying rotations of `pose` and the linear projections.
RectificationModel initial_model(const CameraModel &cam1, const CameraModel &cam2, const RelativePose &pose,
                                 const OptimizerConfig &cfg = {});

/// Sum over both cameras of the weighted distortion at the config's sample grid.
double model_distortion(const RectificationModel &m, const OptimizerConfig &cfg = {});

/// Minimizes the resampling distortion of both images over the eight cubic
/// coefficients, keeping both projections monotone, inside the output image,
/// and within epsilon of row alignment on the correspondences.
/// Throws EpipolarInfeasible or MonotonicityUnrecoverable.
OptimizeResult optimize(const CameraModel &cam1, const CameraModel &cam2, const RelativePose &pose,
                        std::span<const Correspondence> corrs, const OptimizerConfig &cfg = {});

/// |v1^ - v2^| per correspondence; nullopt where either point is unmapped.
std::vector<std::optional<double>> epipolar_residuals(const RectificationModel &m,
                                                      std::span<const Correspondence> corrs);

/// `iter,loss,barrier_weight` rows.
void write_trace_csv(std::ostream &out, std::span<const TraceEntry> trace);

} // namespace fishrect

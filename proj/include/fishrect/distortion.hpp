#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fishrect/common.hpp"

namespace fishrect {

/// A source-to-rectified pixel map; nullopt where the map is undefined.
using PlanarMap = std::function<std::optional<Pixel>(const Pixel &)>;

/// Columns of the 2x2 Jacobian of a planar map: w1 = d(u^, v^)/du, w2 = d(u^, v^)/dv.
struct JacobianColumns {
    Vec2 w1 = Vec2::UnitX();
    Vec2 w2 = Vec2::UnitY();
};

struct DistortionWeights {
    double alpha1 = 0.5;
    double alpha2 = 0.5;
};

struct SampleLoss {
    double area = 0.0;
    double ratio = 0.0;
    double skew = 0.0;

    double weighted(const DistortionWeights &w) const { return area + w.alpha1 * ratio + w.alpha2 * skew; }
};

struct SampleRecord {
    Pixel pixel;
    SampleLoss loss;
};

struct DistortionReport {
    double total = 0.0;
    double sum_area = 0.0;
    double sum_ratio = 0.0;
    double sum_skew = 0.0;
    int n_samples = 0;
    int n_skipped = 0;
    std::vector<SampleRecord> samples;

    double mean() const { return n_samples > 0 ? total / n_samples : 0.0; }
};

/// Central differences with step h. Throws OutOfFov if a stencil point is unmapped.
JacobianColumns local_jacobian(const PlanarMap &map, const Pixel &p, double h);
std::optional<JacobianColumns> try_local_jacobian(const PlanarMap &map, const Pixel &p, double h);

/// Jacobian from the four stencil images map(u+h,v), map(u-h,v), map(u,v+h), map(u,v-h).
JacobianColumns jacobian_from_stencil(const Pixel &u_plus, const Pixel &u_minus, const Pixel &v_plus,
                                      const Pixel &v_minus, double h);

/// Area, aspect-ratio and skew losses of the parallelogram spanned by w1, w2.
SampleLoss sample_losses(const JacobianColumns &j);

/// ceil(sqrt(n)) x ceil(sqrt(n)) grid over [margin, width - margin] x
/// [margin, height - margin] in row-major order, truncated to n points.
/// Throws InvalidMargin.
std::vector<Pixel> select_samples(int width, int height, int n = 500, double margin = 2.0);

/// Sum of weighted losses over samples whose stencil is fully mapped; the rest
/// are skipped and counted. Throws AllSamplesSkipped.
DistortionReport total_distortion(const PlanarMap &map, std::span<const Pixel> samples,
                                  const DistortionWeights &weights = {}, double h = 0.5);

/// `u,v,l_area,l_ratio,l_skew` rows followed by a `# total=...` summary line.
void write_distortion_csv(std::ostream &out, const DistortionReport &report);

} // namespace fishrect

#include "fishrect/distortion.hpp"

#include <cmath>
#include <ostream>

#include "io_util.hpp"

namespace fishrect {

JacobianColumns jacobian_from_stencil(const Pixel &u_plus, const Pixel &u_minus, const Pixel &v_plus,
                                      const Pixel &v_minus, double h) {
    const double inv = 1.0 / (2.0 * h);
    JacobianColumns j;
    j.w1 = Vec2((u_plus.u - u_minus.u) * inv, (u_plus.v - u_minus.v) * inv);
    j.w2 = Vec2((v_plus.u - v_minus.u) * inv, (v_plus.v - v_minus.v) * inv);
    return j;
}

std::optional<JacobianColumns> try_local_jacobian(const PlanarMap &map, const Pixel &p, double h) {
    const auto up = map({p.u + h, p.v});
    const auto um = map({p.u - h, p.v});
    const auto vp = map({p.u, p.v + h});
    const auto vm = map({p.u, p.v - h});
    if (!up || !um || !vp || !vm)
        return std::nullopt;
    return jacobian_from_stencil(*up, *um, *vp, *vm, h);
}

JacobianColumns local_jacobian(const PlanarMap &map, const Pixel &p, double h) {
    if (!(h > 0.0))
        throw Error(ErrorCode::DomainError, "finite-difference step must be positive");
    auto j = try_local_jacobian(map, p, h);
    if (!j)
        throw Error(ErrorCode::OutOfFov, "finite-difference stencil leaves the mapped region");
    return *j;
}

SampleLoss sample_losses(const JacobianColumns &j) {
    const double area = std::abs(j.w1.x() * j.w2.y() - j.w1.y() * j.w2.x());
    const double dn = j.w1.norm() - j.w2.norm();
    const double dot = j.w1.dot(j.w2);
    return {(area - 1.0) * (area - 1.0), dn * dn, dot * dot};
}

std::vector<Pixel> select_samples(int width, int height, int n, double margin) {
    if (n < 4)
        throw Error(ErrorCode::InvalidMargin, "at least 4 samples are required");
    const double span_u = width - 2.0 * margin;
    const double span_v = height - 2.0 * margin;
    if (!(margin >= 0.0) || !(span_u > 0.0) || !(span_v > 0.0))
        throw Error(ErrorCode::InvalidMargin, "margins leave no sampling area");
    const int k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    std::vector<Pixel> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int r = 0; r < k && static_cast<int>(out.size()) < n; ++r)
        for (int c = 0; c < k && static_cast<int>(out.size()) < n; ++c)
            out.push_back({margin + span_u * c / (k - 1), margin + span_v * r / (k - 1)});
    return out;
}

DistortionReport total_distortion(const PlanarMap &map, std::span<const Pixel> samples,
                                  const DistortionWeights &weights, double h) {
    if (samples.empty())
        throw Error(ErrorCode::AllSamplesSkipped, "no samples given");
    DistortionReport report;
    for (const Pixel &p : samples) {
        const auto j = try_local_jacobian(map, p, h);
        if (!j) {
            ++report.n_skipped;
            continue;
        }
        const SampleLoss l = sample_losses(*j);
        report.sum_area += l.area;
        report.sum_ratio += l.ratio;
        report.sum_skew += l.skew;
        ++report.n_samples;
        report.samples.push_back({p, l});
    }
    if (report.n_samples == 0)
        throw Error(ErrorCode::AllSamplesSkipped, "every sample stencil left the mapped region");
    report.total = report.sum_area + weights.alpha1 * report.sum_ratio + weights.alpha2 * report.sum_skew;
    return report;
}

void write_distortion_csv(std::ostream &out, const DistortionReport &report) {
    using detail::format_double;
    out << "u,v,l_area,l_ratio,l_skew\n";
    for (const auto &s : report.samples)
        out << format_double(s.pixel.u) << ',' << format_double(s.pixel.v) << ',' << format_double(s.loss.area)
            << ',' << format_double(s.loss.ratio) << ',' << format_double(s.loss.skew) << '\n';
    out << "# total=" << format_double(report.total) << " mean=" << format_double(report.mean())
        << " n_samples=" << report.n_samples << " n_skipped=" << report.n_skipped << '\n';
}

} // namespace fishrect

#include "fishrect/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <Eigen/Dense>

#include "io_util.hpp"

namespace fishrect {

namespace {

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rectified angles at the four finite-difference stencil points of a sample.
// They depend only on the cameras and rotations, never on the coefficients.
struct Stencil {
    std::array<AngleCoords, 4> pts; // u+h, u-h, v+h, v-h
};

std::vector<Stencil> build_stencils(const RectificationModel &m, View view, std::span<const Pixel> samples,
                                    double h) {
    std::vector<Stencil> out;
    for (const Pixel &p : samples) {
        const std::array<Pixel, 4> probe{Pixel{p.u + h, p.v}, Pixel{p.u - h, p.v}, Pixel{p.u, p.v + h},
                                         Pixel{p.u, p.v - h}};
        Stencil s;
        bool ok = true;
        for (int k = 0; k < 4 && ok; ++k) {
            auto a = source_angles(m, view, probe[static_cast<std::size_t>(k)]);
            ok = a && m.psi_u.in_domain(a->gamma) && m.psi_v.in_domain(a->beta);
            if (ok)
                s.pts[static_cast<std::size_t>(k)] = *a;
        }
        if (ok)
            out.push_back(s);
    }
    return out;
}

// Same arithmetic, in the same order, as total_distortion() on forward_map.
double stencil_distortion(std::span<const Stencil> stencils, const CubicProjection &pu, const CubicProjection &pv,
                          const DistortionWeights &w, double h) {
    double sa = 0.0, sr = 0.0, ss = 0.0;
    for (const auto &s : stencils) {
        const auto map = [&](const AngleCoords &a) { return Pixel{pu.value(a.gamma), pv.value(a.beta)}; };
        const SampleLoss l = sample_losses(jacobian_from_stencil(map(s.pts[0]), map(s.pts[1]), map(s.pts[2]),
                                                                 map(s.pts[3]), h));
        sa += l.area;
        sr += l.ratio;
        ss += l.skew;
    }
    return sa + w.alpha1 * sr + w.alpha2 * ss;
}

// Coefficients are optimized in units where the domain is [-1, 1] and the
// output extent is 1: psi(theta) = out * sum_k x_k (theta / theta_half)^k.
struct Scaling {
    double out_u, out_v, half_u, half_v;

    Vec8 to_x(const CubicProjection &pu, const CubicProjection &pv) const {
        Vec8 x;
        for (int k = 0; k < 4; ++k) {
            x(k) = pu.c[static_cast<std::size_t>(k)] * std::pow(half_u, k) / out_u;
            x(4 + k) = pv.c[static_cast<std::size_t>(k)] * std::pow(half_v, k) / out_v;
        }
        return x;
    }

    std::pair<CubicProjection, CubicProjection> from_x(const Vec8 &x) const {
        CubicProjection pu, pv;
        pu.theta_half = half_u;
        pv.theta_half = half_v;
        for (int k = 0; k < 4; ++k) {
            pu.c[static_cast<std::size_t>(k)] = x(k) * out_u / std::pow(half_u, k);
            pv.c[static_cast<std::size_t>(k)] = x(4 + k) * out_v / std::pow(half_v, k);
        }
        return {pu, pv};
    }
};

struct EpipolarPair {
    double beta1;
    double beta2;
};

class Problem {
  public:
    Problem(std::vector<Stencil> s1, std::vector<Stencil> s2, std::vector<EpipolarPair> epi, Scaling scaling,
            const OptimizerConfig &cfg)
        : s1_(std::move(s1)), s2_(std::move(s2)), epi_(std::move(epi)), scaling_(scaling), cfg_(cfg) {
        const int n = std::max(cfg.n_control_points, 5);
        for (int i = 0; i < n; ++i)
            control_.push_back(-1.0 + 2.0 * i / (n - 1));
    }

    double loss(const Vec8 &x) const {
        auto [pu, pv] = scaling_.from_x(x);
        return stencil_distortion(s1_, pu, pv, cfg_.weights, cfg_.fd_step) +
               stencil_distortion(s2_, pu, pv, cfg_.weights, cfg_.fd_step);
    }

    // Sum of log constraint margins, or -inf when x is infeasible.
    double log_margin(const Vec8 &x) const {
        double sum = 0.0;
        for (int off : {0, 4}) {
            const double x0 = x(off), x1 = x(off + 1), x2 = x(off + 2), x3 = x(off + 3);
            for (double t : control_) {
                const double d = x1 + 2.0 * x2 * t + 3.0 * x3 * t * t;
                if (!(d > 0.0))
                    return -kInf;
                sum += std::log(d);
            }
            const double lower = x0 - x1 + x2 - x3;
            const double upper = 1.0 - (x0 + x1 + x2 + x3);
            if (!(lower > 0.0) || !(upper > 0.0))
                return -kInf;
            sum += std::log(lower) + std::log(upper);
        }
        auto [pu, pv] = scaling_.from_x(x);
        if (!check_monotone(pu, cfg_.n_control_points) || !check_monotone(pv, cfg_.n_control_points))
            return -kInf;
        const double eps2 = cfg_.epsilon * cfg_.epsilon;
        for (const auto &e : epi_) {
            const double dv = pv.value(e.beta1) - pv.value(e.beta2);
            const double g = (eps2 - dv * dv) / eps2;
            if (!(g > 0.0))
                return -kInf;
            sum += std::log(g);
        }
        return sum;
    }

    bool feasible(const Vec8 &x) const { return std::isfinite(log_margin(x)); }

    double merit(const Vec8 &x, double mu, double loss_ref) const {
        const double lm = log_margin(x);
        if (!std::isfinite(lm))
            return kInf;
        return loss(x) / loss_ref - mu * lm;
    }

    const Scaling &scaling() const { return scaling_; }

  private:
    std::vector<Stencil> s1_, s2_;
    std::vector<EpipolarPair> epi_;
    Scaling scaling_;
    OptimizerConfig cfg_;
    std::vector<double> control_;
};

Vec8 merit_gradient(const Problem &prob, const Vec8 &x, double f0, double mu, double loss_ref) {
    Vec8 g;
    for (int i = 0; i < 8; ++i) {
        const double step = 1e-6 * std::max(1.0, std::abs(x(i)));
        Vec8 xp = x, xm = x;
        xp(i) += step;
        xm(i) -= step;
        const double fp = prob.merit(xp, mu, loss_ref);
        const double fm = prob.merit(xm, mu, loss_ref);
        if (std::isfinite(fp) && std::isfinite(fm))
            g(i) = (fp - fm) / (2.0 * step);
        else if (std::isfinite(fp))
            g(i) = (fp - f0) / step;
        else if (std::isfinite(fm))
            g(i) = (f0 - fm) / step;
        else
            g(i) = 0.0;
    }
    return g;
}

std::pair<CubicProjection, CubicProjection> random_projections(const Scaling &sc, std::uint64_t seed, int n_ctrl) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        Vec8 x;
        for (int off : {0, 4}) {
            x(off) = 0.5 + 0.05 * uni(rng);
            x(off + 1) = 0.3 + 0.15 * (uni(rng) + 1.0);
            x(off + 2) = 0.1 * uni(rng);
            x(off + 3) = 0.1 * uni(rng);
        }
        auto [pu, pv] = sc.from_x(x);
        const bool inside = pu.lower() > 0.0 && pu.upper() < sc.out_u && pv.lower() > 0.0 && pv.upper() < sc.out_v;
        if (inside && check_monotone(pu, n_ctrl) && check_monotone(pv, n_ctrl))
            return {pu, pv};
    }
    throw Error(ErrorCode::MonotonicityUnrecoverable, "could not draw a random monotone initialization");
}

} // namespace

std::pair<CubicProjection, CubicProjection> initialize_coefficients(const CameraModel &cam1, const CameraModel &cam2,
                                                                    int out_width, int out_height, double theta_half) {
    if (!(theta_half > 0.0))
        theta_half = default_theta_half(cam1, cam2);
    CubicProjection pu, pv;
    pu.theta_half = pv.theta_half = theta_half;
    pu.c = {out_width / 2.0, out_width / (2.0 * theta_half), 0.0, 0.0};
    pv.c = {out_height / 2.0, out_height / (2.0 * theta_half), 0.0, 0.0};
    return {pu, pv};
}

RectificationModel initial_model(const CameraModel &cam1, const CameraModel &cam2, const RelativePose &pose,
                                 const OptimizerConfig &cfg) {
    const int w = cfg.out_width > 0 ? cfg.out_width : cam1.width();
    const int h = cfg.out_height > 0 ? cfg.out_height : cam1.height();
    const RectifyingRotations rot = rectifying_rotations(pose);
    const auto [half_u, half_v] =
        cfg.theta_half > 0.0 ? std::pair{cfg.theta_half, cfg.theta_half} : default_half_angles(cam1, cam2);
    const CubicProjection pu = initialize_coefficients(cam1, cam2, w, h, half_u).first;
    const CubicProjection pv = initialize_coefficients(cam1, cam2, w, h, half_v).second;
    return RectificationModel{rot, pu, pv, cam1, cam2, w, h};
}

double model_distortion(const RectificationModel &m, const OptimizerConfig &cfg) {
    double total = 0.0;
    for (View view : {View::First, View::Second}) {
        const CameraModel &cam = m.camera(view);
        const auto samples = select_samples(cam.width(), cam.height(), cfg.n_samples);
        const PlanarMap map = [&m, view](const Pixel &p) { return try_forward_map(m, view, p); };
        total += total_distortion(map, samples, cfg.weights, cfg.fd_step).total;
    }
    return total;
}

std::vector<std::optional<double>> epipolar_residuals(const RectificationModel &m,
                                                      std::span<const Correspondence> corrs) {
    std::vector<std::optional<double>> out;
    out.reserve(corrs.size());
    for (const auto &c : corrs) {
        const auto q1 = try_forward_map(m, View::First, c.first);
        const auto q2 = try_forward_map(m, View::Second, c.second);
        if (q1 && q2)
            out.push_back(std::abs(q1->v - q2->v));
        else
            out.push_back(std::nullopt);
    }
    return out;
}

OptimizeResult optimize(const CameraModel &cam1, const CameraModel &cam2, const RelativePose &pose,
                        std::span<const Correspondence> corrs, const OptimizerConfig &cfg) {
    if (!(cfg.epsilon > 0.0) || cfg.max_iters < 1 || cfg.n_control_points < 5)
        throw Error(ErrorCode::DomainError, "invalid optimizer configuration");

    RectificationModel model = initial_model(cam1, cam2, pose, cfg);
    const Scaling scaling{static_cast<double>(model.out_width), static_cast<double>(model.out_height),
                          model.psi_u.theta_half, model.psi_v.theta_half};

    // Stencil angles are fixed by the cameras, rotations and projection domain.
    const auto samples1 = select_samples(cam1.width(), cam1.height(), cfg.n_samples);
    const auto samples2 = select_samples(cam2.width(), cam2.height(), cfg.n_samples);
    auto st1 = build_stencils(model, View::First, samples1, cfg.fd_step);
    auto st2 = build_stencils(model, View::Second, samples2, cfg.fd_step);
    if (st1.empty() && st2.empty())
        throw Error(ErrorCode::AllSamplesSkipped, "no distortion sample maps into the projection domain");
    const int n_used = static_cast<int>(st1.size() + st2.size());

    const double initial_loss = stencil_distortion(st1, model.psi_u, model.psi_v, cfg.weights, cfg.fd_step) +
                                stencil_distortion(st2, model.psi_u, model.psi_v, cfg.weights, cfg.fd_step);

    // The linear initialization touches the coverage bounds; the barrier needs
    // a strictly interior start.
    Vec8 x_start;
    if (cfg.random_init) {
        auto [pu, pv] = random_projections(scaling, cfg.seed, cfg.n_control_points);
        x_start = scaling.to_x(pu, pv);
    } else {
        x_start = scaling.to_x(model.psi_u, model.psi_v);
        for (int off : {0, 4})
            for (int k = 1; k < 4; ++k)
                x_start(off + k) *= 0.99;
    }
    {
        auto [pu, pv] = scaling.from_x(x_start);
        if (!check_monotone(pu, cfg.n_control_points) || !check_monotone(pv, cfg.n_control_points))
            throw Error(ErrorCode::MonotonicityUnrecoverable, "initial projections are not monotone");
    }

    // Epipolar constraints: correspondences within epsilon at the start.
    std::vector<EpipolarPair> epi;
    std::vector<std::size_t> constrained;
    int unmapped = 0, outliers = 0;
    {
        auto [pu, pv] = scaling.from_x(x_start);
        for (std::size_t i = 0; i < corrs.size(); ++i) {
            const Correspondence &c = corrs[i];
            const auto a1 = source_angles(model, View::First, c.first);
            const auto a2 = source_angles(model, View::Second, c.second);
            if (!a1 || !a2 || !pv.in_domain(a1->beta) || !pv.in_domain(a2->beta) || !pu.in_domain(a1->gamma) ||
                !pu.in_domain(a2->gamma)) {
                ++unmapped;
                continue;
            }
            const double dv = std::abs(pv.value(a1->beta) - pv.value(a2->beta));
            if (dv < cfg.epsilon) {
                epi.push_back({a1->beta, a2->beta});
                constrained.push_back(i);
            } else
                ++outliers;
        }
        const int mapped = static_cast<int>(corrs.size()) - unmapped;
        if (mapped > 0 && static_cast<double>(epi.size()) < cfg.min_epipolar_ratio * mapped)
            throw Error(ErrorCode::EpipolarInfeasible,
                        std::to_string(outliers) + " of " + std::to_string(mapped) +
                            " correspondences exceed the epipolar tolerance at the start; check the pose");
    }

    const Problem prob(std::move(st1), std::move(st2), std::move(epi), scaling, cfg);
    if (!prob.feasible(x_start))
        throw Error(ErrorCode::MonotonicityUnrecoverable, "starting point violates the constraints");

    const double loss_ref = std::max(prob.loss(x_start), 1e-12);

    OptimizeResult result{model, initial_loss, initial_loss, 0, 0.0, outliers, unmapped, false, n_used, {}};
    result.trace.push_back({0, initial_loss, 0.0, model.psi_u, model.psi_v});
    Vec8 best_x;
    double best_loss = initial_loss;
    bool have_best = false;

    Vec8 x = x_start;
    int iter = 0;
    bool budget_exhausted = false;
    for (double mu = cfg.barrier_initial; mu >= cfg.barrier_final * (1.0 - 1e-9) && !budget_exhausted;
         mu *= cfg.barrier_decay) {
        double f = prob.merit(x, mu, loss_ref);
        Vec8 g = merit_gradient(prob, x, f, mu, loss_ref);
        Mat8 Hinv = Mat8::Identity();
        std::vector<double> history{f};
        for (int inner = 0; inner < 200; ++inner) {
            if (iter >= cfg.max_iters) {
                budget_exhausted = true;
                break;
            }
            if (g.lpNorm<Eigen::Infinity>() < 1e-10)
                break;
            Vec8 dir = -Hinv * g;
            if (dir.dot(g) >= 0.0) {
                Hinv.setIdentity();
                dir = -g;
            }
            double alpha = 1.0;
            Vec8 x_new;
            double f_new = kInf;
            bool accepted = false;
            for (int ls = 0; ls < 60; ++ls) {
                x_new = x + alpha * dir;
                f_new = prob.merit(x_new, mu, loss_ref);
                if (std::isfinite(f_new) && f_new <= f + 1e-4 * alpha * dir.dot(g)) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) {
                if (Hinv.isIdentity())
                    break;
                Hinv.setIdentity();
                continue;
            }
            const Vec8 g_new = merit_gradient(prob, x_new, f_new, mu, loss_ref);
            const Vec8 s = x_new - x;
            const Vec8 y = g_new - g;
            const double sy = s.dot(y);
            if (sy > 1e-16 * s.norm() * y.norm()) {
                if (inner == 0)
                    Hinv *= sy / y.squaredNorm();
                const double rho = 1.0 / sy;
                const Mat8 V = Mat8::Identity() - rho * y * s.transpose();
                Hinv = V.transpose() * Hinv * V + rho * s * s.transpose();
            }
            x = x_new;
            f = f_new;
            g = g_new;
            ++iter;

            const double l = prob.loss(x);
            auto [pu, pv] = scaling.from_x(x);
            result.trace.push_back({iter, l, mu, pu, pv});
            if (l <= best_loss) {
                best_loss = l;
                best_x = x;
                have_best = true;
            }
            history.push_back(f);
            if (history.size() > 5) {
                const double old = history[history.size() - 6];
                if ((old - f) <= 1e-9 * std::max(std::abs(old), 1e-300))
                    break;
            }
        }
    }

    result.iterations = iter;
    result.converged = !budget_exhausted;
    if (have_best) {
        auto [pu, pv] = scaling.from_x(best_x);
        result.model.psi_u = pu;
        result.model.psi_v = pv;
        result.final_loss = best_loss;
    }

    double max_res = 0.0;
    for (std::size_t i : constrained) {
        const auto a1 = source_angles(result.model, View::First, corrs[i].first);
        const auto a2 = source_angles(result.model, View::Second, corrs[i].second);
        const auto &pv = result.model.psi_v;
        max_res = std::max(max_res, std::abs(pv.value(a1->beta) - pv.value(a2->beta)));
    }
    result.epipolar_residual_max = max_res;
    return result;
}

void write_trace_csv(std::ostream &out, std::span<const TraceEntry> trace) {
    out << "iter,loss,barrier_weight\n";
    for (const auto &t : trace)
        out << t.iter << ',' << detail::format_double(t.loss) << ',' << detail::format_double(t.barrier_weight)
            << '\n';
}

} // namespace fishrect

#include "fishrect/epipolar.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "io_util.hpp"

namespace fishrect {

namespace {

struct BearingPair {
    Bearing b1;
    Bearing b2;
};

Mat3 solve_linear_essential(std::span<const BearingPair> pairs) {
    Eigen::Matrix<double, 9, 9> AtA = Eigen::Matrix<double, 9, 9>::Zero();
    for (const auto &p : pairs) {
        Eigen::Matrix<double, 9, 1> row;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                row(3 * i + j) = p.b2(i) * p.b1(j);
        AtA.noalias() += row * row.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(AtA);
    const Eigen::Matrix<double, 9, 1> e = eig.eigenvectors().col(0);
    Mat3 E;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            E(i, j) = e(3 * i + j);
    // Project onto the essential manifold.
    Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * Vec3(1.0, 1.0, 0.0).asDiagonal() * svd.matrixV().transpose();
}

// Depths (lambda1, lambda2) with lambda1*b1 ~ baseline_dir + lambda2*R*b2.
Eigen::Vector2d triangulate_depths(const Mat3 &R, const Vec3 &t, const BearingPair &p) {
    Eigen::Matrix<double, 3, 2> M;
    M.col(0) = p.b1;
    M.col(1) = -(R * p.b2);
    return M.colPivHouseholderQr().solve(t);
}

std::vector<RelativePose> decompose_essential(const Mat3 &E) {
    Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 U = svd.matrixU();
    Mat3 V = svd.matrixV();
    if (U.determinant() < 0)
        U = -U;
    if (V.determinant() < 0)
        V = -V;
    Mat3 W;
    W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    // Candidates in the X2 = Rc X1 + tc convention, converted to RelativePose.
    const std::array<Mat3, 2> rots{U * W * V.transpose(), U * W.transpose() * V.transpose()};
    const Vec3 tc = U.col(2);
    std::vector<RelativePose> out;
    for (const Mat3 &Rc : rots) {
        for (double sign : {1.0, -1.0}) {
            RelativePose pose;
            pose.rotation = Rc.transpose();
            pose.translation_dir = (-(Rc.transpose() * (sign * tc))).normalized();
            out.push_back(pose);
        }
    }
    return out;
}

int count_in_front(const RelativePose &pose, std::span<const BearingPair> pairs) {
    int n = 0;
    for (const auto &p : pairs) {
        const Eigen::Vector2d d = triangulate_depths(pose.rotation, pose.translation_dir, p);
        if (d(0) > 0.0 && d(1) > 0.0)
            ++n;
    }
    return n;
}

RelativePose select_by_cheirality(const Mat3 &E, std::span<const BearingPair> pairs) {
    auto candidates = decompose_essential(E);
    int best = -1;
    RelativePose chosen;
    for (const auto &c : candidates) {
        const int n = count_in_front(c, pairs);
        if (n > best) {
            best = n;
            chosen = c;
        }
    }
    return chosen;
}

// Orthonormal basis of the tangent plane at a unit vector.
std::pair<Vec3, Vec3> tangent_basis(const Vec3 &t) {
    Vec3 helper = std::abs(t.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    Vec3 a = t.cross(helper).normalized();
    Vec3 b = t.cross(a);
    return {a, b};
}

double sampson_cost(const RelativePose &pose, std::span<const BearingPair> pairs, Eigen::VectorXd *residuals) {
    const Mat3 E = essential_from_pose(pose);
    double cost = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double r = angular_sampson(E, pairs[i].b1, pairs[i].b2);
        if (residuals)
            (*residuals)(static_cast<Eigen::Index>(i)) = r;
        cost += r * r;
    }
    return cost;
}

RelativePose apply_update(const RelativePose &pose, const Eigen::Matrix<double, 5, 1> &delta) {
    RelativePose out = pose;
    out.rotation = rotation_from_axis_angle(delta.head<3>()) * pose.rotation;
    auto [a, b] = tangent_basis(pose.translation_dir);
    out.translation_dir = (pose.translation_dir + delta(3) * a + delta(4) * b).normalized();
    return out;
}

// Levenberg-Marquardt on the angular Sampson error with numeric Jacobians.
RelativePose refine_pose(RelativePose pose, std::span<const BearingPair> pairs) {
    const auto n = static_cast<Eigen::Index>(pairs.size());
    Eigen::VectorXd r(n), r_step(n);
    double cost = sampson_cost(pose, pairs, &r);
    double damping = 1e-3;
    for (int iter = 0; iter < 50; ++iter) {
        Eigen::Matrix<double, Eigen::Dynamic, 5> J(n, 5);
        constexpr double step = 1e-7;
        for (int k = 0; k < 5; ++k) {
            Eigen::Matrix<double, 5, 1> d = Eigen::Matrix<double, 5, 1>::Zero();
            d(k) = step;
            Eigen::VectorXd rp(n), rm(n);
            sampson_cost(apply_update(pose, d), pairs, &rp);
            sampson_cost(apply_update(pose, -d), pairs, &rm);
            J.col(k) = (rp - rm) / (2.0 * step);
        }
        const Eigen::Matrix<double, 5, 5> JtJ = J.transpose() * J;
        const Eigen::Matrix<double, 5, 1> g = J.transpose() * r;
        bool improved = false;
        for (int tries = 0; tries < 10; ++tries) {
            Eigen::Matrix<double, 5, 5> H = JtJ;
            H.diagonal() *= 1.0 + damping;
            const Eigen::Matrix<double, 5, 1> delta = H.ldlt().solve(-g);
            const RelativePose candidate = apply_update(pose, delta);
            const double c = sampson_cost(candidate, pairs, &r_step);
            if (c < cost) {
                const double rel = (cost - c) / std::max(cost, 1e-300);
                pose = candidate;
                cost = c;
                r = r_step;
                damping = std::max(damping * 0.3, 1e-12);
                improved = true;
                if (rel < 1e-12)
                    return pose;
                break;
            }
            damping *= 10.0;
        }
        if (!improved)
            break;
    }
    return pose;
}

} // namespace

Mat3 canonical_essential() { return skew(Vec3::UnitX()); }

Mat3 skew(const Vec3 &v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

Mat3 essential_from_rotations(const Mat3 &R1, const Mat3 &R2) {
    return R2 * canonical_essential() * R1.transpose();
}

Mat3 essential_from_pose(const RelativePose &pose) {
    return pose.rotation.transpose() * skew(pose.translation_dir);
}

RectifyingRotations rectifying_rotations(const RelativePose &pose) {
    const double norm = pose.translation_dir.norm();
    if (!(norm >= 1e-12) || !std::isfinite(norm))
        throw Error(ErrorCode::DegeneratePose, "translation direction is numerically zero");
    const Vec3 x = pose.translation_dir / norm;

    // Mean optical axis of both cameras in camera-1 coordinates.
    const Vec3 mean_axis = Vec3::UnitZ() + pose.rotation.col(2);
    Vec3 z = mean_axis - mean_axis.dot(x) * x;
    if (z.norm() < 1e-9) {
        // Looking along the baseline: any perpendicular axis is admissible.
        for (const Vec3 &candidate : {Vec3(Vec3::UnitY()), Vec3(Vec3::UnitX()), Vec3(Vec3::UnitZ())}) {
            z = candidate - candidate.dot(x) * x;
            if (z.norm() > 1e-3)
                break;
        }
    }
    z.normalize();
    const Vec3 y = z.cross(x);

    RectifyingRotations out;
    out.R1.col(0) = x;
    out.R1.col(1) = y;
    out.R1.col(2) = z;
    out.R2 = pose.rotation.transpose() * out.R1;
    return out;
}

double rectified_epipolar_residual(const RectifyingRotations &rot, const Bearing &b1, const Bearing &b2) {
    return (rot.R2.transpose() * b2).dot(canonical_essential() * (rot.R1.transpose() * b1));
}

MultiplierPair make_multiplier_pair(double a11, const Eigen::RowVector2d &A1_row, const Eigen::Matrix2d &A2_block,
                                    double a11p, const Eigen::RowVector2d &A1p_row, double lambda) {
    if (lambda == 0.0 || !std::isfinite(lambda))
        throw Error(ErrorCode::SingularInput, "lambda must be nonzero");
    MultiplierPair pair;
    pair.lambda = lambda;
    pair.A.setZero();
    pair.A(0, 0) = a11;
    pair.A.block<1, 2>(0, 1) = A1_row;
    pair.A.block<2, 2>(1, 1) = A2_block;
    pair.A_prime.setZero();
    pair.A_prime(0, 0) = a11p;
    pair.A_prime.block<1, 2>(0, 1) = A1p_row;
    pair.A_prime.block<2, 2>(1, 1) = lambda * A2_block;
    // Block upper-triangular: det = a11 * det(A2).
    const double scale = std::max({1.0, pair.A.cwiseAbs().maxCoeff(), pair.A_prime.cwiseAbs().maxCoeff()});
    const double tol = 1e-12 * scale * scale * scale;
    if (!pair.A.allFinite() || !pair.A_prime.allFinite() || std::abs(pair.A.determinant()) <= tol ||
        std::abs(pair.A_prime.determinant()) <= tol)
        throw Error(ErrorCode::SingularInput, "multiplier pair matrices must be non-singular");
    return pair;
}

double verify_multiplier_pair(const Mat3 &A, const Mat3 &A_prime) {
    const Mat3 E0 = canonical_essential();
    const Mat3 M = A_prime.transpose() * E0 * A;
    const double s = M.cwiseProduct(E0).sum() / E0.squaredNorm();
    if (s == 0.0 || !std::isfinite(s))
        return std::numeric_limits<double>::infinity();
    return (M / s - E0).norm();
}

double angular_sampson(const Mat3 &E, const Bearing &b1, const Bearing &b2) {
    const double num = b2.dot(E * b1);
    const Vec3 g1 = E.transpose() * b2;
    const Vec3 g2 = E * b1;
    const Vec3 t1 = g1 - g1.dot(b1) * b1;
    const Vec3 t2 = g2 - g2.dot(b2) * b2;
    const double den = std::sqrt(t1.squaredNorm() + t2.squaredNorm());
    if (den == 0.0)
        return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(num) / den;
}

RelativePose estimate_relative_pose(std::span<const Correspondence> corrs, const CameraModel &cam1,
                                    const CameraModel &cam2, const RansacConfig &ransac) {
    constexpr std::size_t kMinimal = 8;
    if (corrs.size() < kMinimal)
        throw Error(ErrorCode::InsufficientCorrespondences,
                    "need at least 8 correspondences, got " + std::to_string(corrs.size()));
    std::vector<BearingPair> pairs;
    pairs.reserve(corrs.size());
    for (const auto &c : corrs) {
        auto b1 = cam1.try_pixel_to_bearing(c.first);
        auto b2 = cam2.try_pixel_to_bearing(c.second);
        if (b1 && b2)
            pairs.push_back({*b1, *b2});
    }
    if (pairs.size() < kMinimal)
        throw Error(ErrorCode::InsufficientCorrespondences, "fewer than 8 correspondences inside both fields of view");

    const auto score = [&](const Mat3 &E, int &inliers, double &truncated) {
        inliers = 0;
        truncated = 0.0;
        for (const auto &p : pairs) {
            const double r = angular_sampson(E, p.b1, p.b2);
            if (r < ransac.threshold) {
                ++inliers;
                truncated += r;
            } else {
                truncated += ransac.threshold;
            }
        }
    };

    std::mt19937_64 rng(ransac.seed);
    std::vector<std::size_t> index(pairs.size());
    std::iota(index.begin(), index.end(), 0);
    std::array<BearingPair, kMinimal> sample;
    Mat3 best_E = Mat3::Zero();
    int best_inliers = -1;
    double best_truncated = std::numeric_limits<double>::infinity();
    for (int it = 0; it < ransac.iterations; ++it) {
        // Partial Fisher-Yates for a distinct minimal sample.
        for (std::size_t k = 0; k < kMinimal; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, index.size() - 1);
            std::swap(index[k], index[pick(rng)]);
            sample[k] = pairs[index[k]];
        }
        const Mat3 E = solve_linear_essential(sample);
        int inliers;
        double truncated;
        score(E, inliers, truncated);
        if (inliers > best_inliers || (inliers == best_inliers && truncated < best_truncated)) {
            best_inliers = inliers;
            best_truncated = truncated;
            best_E = E;
        }
    }

    const auto collect_inliers = [&](const Mat3 &E) {
        std::vector<BearingPair> in;
        for (const auto &p : pairs)
            if (angular_sampson(E, p.b1, p.b2) < ransac.threshold)
                in.push_back(p);
        return in;
    };

    std::vector<BearingPair> inliers = collect_inliers(best_E);
    if (inliers.size() >= kMinimal) {
        for (int round = 0; round < 2; ++round) {
            const Mat3 E = solve_linear_essential(inliers);
            auto refit = collect_inliers(E);
            if (refit.size() < inliers.size())
                break;
            best_E = E;
            inliers = std::move(refit);
        }
    }
    if (inliers.size() < kMinimal ||
        static_cast<double>(inliers.size()) < ransac.min_inlier_ratio * static_cast<double>(pairs.size()))
        throw Error(ErrorCode::NoConsensus, "inlier ratio " + std::to_string(inliers.size()) + "/" +
                                                std::to_string(pairs.size()) + " below the consensus threshold");

    RelativePose pose = select_by_cheirality(best_E, inliers);
    pose = refine_pose(pose, inliers);
    // Refinement may move the sign-ambiguous solution; recheck the sign of t.
    RelativePose flipped = pose;
    flipped.translation_dir = -pose.translation_dir;
    if (count_in_front(flipped, inliers) > count_in_front(pose, inliers))
        pose = flipped;
    pose.baseline = 1.0;

    const Mat3 E = essential_from_pose(pose);
    std::size_t final_inliers = 0;
    for (const auto &p : pairs)
        if (angular_sampson(E, p.b1, p.b2) < ransac.threshold)
            ++final_inliers;
    if (static_cast<double>(final_inliers) < ransac.min_inlier_ratio * static_cast<double>(pairs.size()))
        throw Error(ErrorCode::NoConsensus, "refined pose lost consensus");
    return pose;
}

double rotation_angle_between(const Mat3 &Ra, const Mat3 &Rb) {
    const Mat3 D = Ra.transpose() * Rb;
    return Eigen::AngleAxisd(D).angle();
}

Mat3 rotation_from_axis_angle(const Vec3 &axis_angle) {
    const double angle = axis_angle.norm();
    if (angle == 0.0)
        return Mat3::Identity();
    return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

std::vector<Correspondence> load_correspondences(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::ParseError, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorCode::ParseError, path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != "u1,v1,u2,v2")
        throw Error(ErrorCode::ParseError, path.string() + ": expected header 'u1,v1,u2,v2'");
    std::vector<Correspondence> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r")
            continue;
        std::array<double, 4> vals{};
        std::size_t start = 0;
        for (int k = 0; k < 4; ++k) {
            const std::size_t end = line.find(',', start);
            if ((k < 3) == (end == std::string::npos))
                throw Error(ErrorCode::ParseError,
                            path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
            vals[k] = detail::parse_double(std::string_view(line).substr(start, end - start));
            start = end + 1;
        }
        out.push_back({{vals[0], vals[1]}, {vals[2], vals[3]}});
    }
    return out;
}

void save_correspondences(const std::filesystem::path &path, std::span<const Correspondence> corrs) {
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "u1,v1,u2,v2\n";
    for (const auto &c : corrs)
        out << detail::format_double(c.first.u) << ',' << detail::format_double(c.first.v) << ','
            << detail::format_double(c.second.u) << ',' << detail::format_double(c.second.v) << '\n';
}

RelativePose load_pose(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::ParseError, "cannot open " + path.string());
    RelativePose pose;
    try {
        nlohmann::json j;
        in >> j;
        const auto R = j.at("R").get<std::vector<double>>();
        const auto t = j.at("t").get<std::vector<double>>();
        if (R.size() != 9 || t.size() != 3)
            throw Error(ErrorCode::ParseError, path.string() + ": R needs 9 and t needs 3 numbers");
        for (int i = 0; i < 9; ++i)
            pose.rotation(i / 3, i % 3) = R[static_cast<std::size_t>(i)];
        pose.translation_dir = Vec3(t[0], t[1], t[2]);
        pose.baseline = j.value("baseline", 1.0);
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    const double defect = (pose.rotation.transpose() * pose.rotation - Mat3::Identity()).norm();
    if (!(defect < 1e-6) || !(pose.rotation.determinant() > 0.0))
        throw Error(ErrorCode::InvalidModel, path.string() + ": R is not a rotation matrix");
    const double tn = pose.translation_dir.norm();
    if (!(tn > 1e-12))
        throw Error(ErrorCode::DegeneratePose, path.string() + ": translation direction is zero");
    pose.translation_dir /= tn;
    return pose;
}

void save_pose(const std::filesystem::path &path, const RelativePose &pose) {
    nlohmann::json j;
    std::vector<double> R(9);
    for (int i = 0; i < 9; ++i)
        R[static_cast<std::size_t>(i)] = pose.rotation(i / 3, i % 3);
    j["R"] = R;
    j["t"] = {pose.translation_dir.x(), pose.translation_dir.y(), pose.translation_dir.z()};
    j["baseline"] = pose.baseline;
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

} // namespace fishrect

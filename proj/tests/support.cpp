#include "support.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sys/wait.h>

#include <Eigen/Dense>

namespace fishrect::testkit {

std::optional<double> sample_bilinear(const RasterImage &img, double x, double y) {
    if (!(x >= 0.0 && y >= 0.0 && x <= img.width - 1 && y <= img.height - 1))
        return std::nullopt;
    const int x0 = std::min(static_cast<int>(std::floor(x)), img.width - 2);
    const int y0 = std::min(static_cast<int>(std::floor(y)), img.height - 2);
    const double fx = x - x0, fy = y - y0;
    const double a = img.at(x0, y0), b = img.at(x0 + 1, y0);
    const double c = img.at(x0, y0 + 1), d = img.at(x0 + 1, y0 + 1);
    return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
}

std::optional<Pixel> refine_corner(const RasterImage &img, const Pixel &start, int half_window, double max_shift) {
    // Saddle point of the Gaussian-smoothed image. A checkerboard X-junction is point
    // symmetric about the corner, so the smoothed gradient vanishes exactly there.
    const RasterImage gray = to_gray(img);
    const double sigma = half_window / 3.0;
    const double inv_s2 = 1.0 / (sigma * sigma);
    Eigen::Vector2d q(start.u, start.v);
    for (int iter = 0; iter < 50; ++iter) {
        const int cx = static_cast<int>(std::lround(q.x())), cy = static_cast<int>(std::lround(q.y()));
        if (cx - half_window < 0 || cy - half_window < 0 || cx + half_window >= gray.width ||
            cy + half_window >= gray.height)
            return std::nullopt;
        Eigen::Vector2d g = Eigen::Vector2d::Zero();
        Eigen::Matrix2d H = Eigen::Matrix2d::Zero();
        for (int y = cy - half_window; y <= cy + half_window; ++y) {
            for (int x = cx - half_window; x <= cx + half_window; ++x) {
                const Eigen::Vector2d d(x - q.x(), y - q.y());
                const double w = gray.at(x, y) * std::exp(-0.5 * d.squaredNorm() * inv_s2);
                // Derivatives of G(p - q) with respect to q.
                g += w * inv_s2 * d;
                H += w * inv_s2 * (inv_s2 * d * d.transpose() - Eigen::Matrix2d::Identity());
            }
        }
        if (!(H.determinant() < 0.0))
            return std::nullopt; // not a saddle
        const Eigen::Vector2d step = H.lu().solve(g);
        q -= step;
        if ((q - Eigen::Vector2d(start.u, start.v)).norm() > max_shift)
            return std::nullopt;
        if (step.norm() < 1e-6)
            break;
    }
    return Pixel{q.x(), q.y()};
}

std::filesystem::path scratch_dir(const std::string &name) {
    const auto dir = std::filesystem::temp_directory_path() / ("fishrect_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

bool files_identical(const std::filesystem::path &a, const std::filesystem::path &b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb)
        return false;
    const std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return sa == sb;
}

int run_command(const std::string &cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

SyntheticScene checkerboard_scene(const StereoRig &rig, double distance, double cell, int cells_u, int cells_v) {
    SyntheticScene scene;
    scene.planes.push_back(centered_checkerboard(rig, distance, cell, cells_u, cells_v));
    for (const auto &c : scene.planes.front().interior_corners())
        scene.points.push_back({c, {255, 255, 255}});
    return scene;
}

} // namespace fishrect::testkit

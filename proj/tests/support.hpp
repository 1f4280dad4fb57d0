#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fishrect/image.hpp"
#include "fishrect/synth.hpp"

namespace fishrect::testkit {

/// Sub-pixel X-junction refinement: Newton iteration to the saddle point of the
/// Gaussian-smoothed intensity (sigma = half_window / 3). Returns nullopt if the
/// point is not a saddle, the window leaves the image, or the estimate drifts
/// beyond `max_shift` from the start.
std::optional<Pixel> refine_corner(const RasterImage &img, const Pixel &start, int half_window = 5,
                                   double max_shift = 3.0);

/// Bilinear sample of channel 0; nullopt outside the image.
std::optional<double> sample_bilinear(const RasterImage &img, double x, double y);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string &name);

/// Byte-for-byte file comparison.
bool files_identical(const std::filesystem::path &a, const std::filesystem::path &b);

/// Runs a shell command, returning its exit status.
int run_command(const std::string &cmd);

/// Checkerboard scene for a rig with a board `distance` ahead.
SyntheticScene checkerboard_scene(const StereoRig &rig, double distance, double cell, int cells_u, int cells_v);

} // namespace fishrect::testkit

#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace fishrect {

enum class ErrorCode {
    OutOfFov,
    NonFinite,
    ParseError,
    InvalidModel,
    DegeneratePose,
    SingularInput,
    InsufficientCorrespondences,
    NoConsensus,
    DegenerateRay,
    DomainError,
    OutOfRange,
    InvalidMargin,
    AllSamplesSkipped,
    MonotonicityUnrecoverable,
    EpipolarInfeasible,
    DimensionMismatch,
    ZeroDisparityAngle,
    EmptyFrustum,
    FovTooWide,
    IoError,
};

const char *to_string(ErrorCode code);

// NoConsensus, EpipolarInfeasible and MonotonicityUnrecoverable; the CLI maps
// these to exit code 3 and everything else to 2.
bool is_numerical_failure(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &what);
    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

/// Continuous image coordinate. Integer values sit on pixel centres, origin top-left.
struct Pixel {
    double u = 0.0;
    double v = 0.0;
};

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Unit ray in a camera frame (x right, y down, z along the optical axis).
using Bearing = Eigen::Vector3d;

/// Selects the first (left) or second (right) camera of a stereo pair.
enum class View { First = 1, Second = 2 };

} // namespace fishrect

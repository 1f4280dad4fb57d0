#include "fishrect/common.hpp"

namespace fishrect {

const char *to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::OutOfFov: return "OutOfFov";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::DegeneratePose: return "DegeneratePose";
    case ErrorCode::SingularInput: return "SingularInput";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::DegenerateRay: return "DegenerateRay";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidMargin: return "InvalidMargin";
    case ErrorCode::AllSamplesSkipped: return "AllSamplesSkipped";
    case ErrorCode::MonotonicityUnrecoverable: return "MonotonicityUnrecoverable";
    case ErrorCode::EpipolarInfeasible: return "EpipolarInfeasible";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroDisparityAngle: return "ZeroDisparityAngle";
    case ErrorCode::EmptyFrustum: return "EmptyFrustum";
    case ErrorCode::FovTooWide: return "FovTooWide";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

bool is_numerical_failure(ErrorCode code) {
    return code == ErrorCode::NoConsensus || code == ErrorCode::EpipolarInfeasible ||
           code == ErrorCode::MonotonicityUnrecoverable;
}

Error::Error(ErrorCode code, const std::string &what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

} // namespace fishrect

#include "endonoise/error.hpp"

namespace endonoise {

std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Format: return "format";
    case ErrorKind::Metadata: return "metadata";
    case ErrorKind::Range: return "range";
    case ErrorKind::Argument: return "argument";
    case ErrorKind::Io: return "io";
    case ErrorKind::EstimationFailed: return "estimation_failed";
    case ErrorKind::RankDeficient: return "rank_deficient";
    case ErrorKind::CalibrationQuality: return "calibration_quality";
    case ErrorKind::Timeout: return "timeout";
    }
    return "unknown";
}

} // namespace endonoise

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace endonoise {

enum class ErrorKind {
    Format,             // malformed PGM / binary container
    Metadata,           // sidecar or header missing a field
    Range,              // sample outside the declared bit depth
    Argument,           // precondition violated by the caller
    Io,                 // filesystem failure
    EstimationFailed,   // PBN estimator found no usable rows
    RankDeficient,      // regression with < 2 distinct abscissae
    CalibrationQuality, // fit came out physically implausible
    Timeout,            // external denoiser never answered
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message)
{
    throw Error(kind, message);
}

inline void require(bool condition, const std::string& message)
{
    if (!condition)
        throw Error(ErrorKind::Argument, message);
}

} // namespace endonoise

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dispcal {

enum class ErrorKind {
    InvalidArgument,
    InvalidGeometry,
    DegenerateLattice,
    DimensionMismatch,
    SingularSystem,
    IllConditioned,
    OutOfFrame,
    UnreliablePeak,
    NoCandidate,
    AmbiguousCalibration,
    DegenerateObservation,
    OffsetUndetectable,
    NoPeaks,
    Config,
    Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Error raised by every dispcal operation. `stage` names the pipeline step
/// that failed when the error crossed a pipeline boundary (empty otherwise).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what, std::string stage = {})
        : std::runtime_error(stage.empty() ? what : stage + ": " + what),
          kind_(kind),
          stage_(std::move(stage)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& stage() const noexcept { return stage_; }

private:
    ErrorKind kind_;
    std::string stage_;
};

}  // namespace dispcal

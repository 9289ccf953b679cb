#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace egofov {

enum class ErrorCode {
    Io,
    Format,
    Parameter,
    DegenerateRegion,
    EmptyIndex,
    DegenerateSample,
    InsufficientMatches,
    NoConsensus,
    InvalidRotation,
    Lookup,
    Manifest,
    Load,
    Evaluation,
    Session,
    Config,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a code so callers (and the CLI
// exit-code contract) can branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace egofov

#ifndef CSPACE_ERROR_HPP
#define CSPACE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace cspace {

enum class ErrorKind {
    EmptyCorpus,
    MalformedRecord,
    UnknownScoringKind,
    DimensionMismatch,
    MissingFile,
    UnknownWord,
    UnknownConcept,
    DuplicateDescriptor,
    ConvergenceFailure,
    Cancelled,
    LevelOutOfRange,
    StaleIndex,
    NoConcepts,
    DegenerateExtent,
    UntrainedModel,
    ForbiddenAction,
    UnknownTarget,
    LastConcept,
    EmptyQueue,
    JobAlreadyRunning,
    ReplayDivergence,
    UnknownSession,
    InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/**
 * Every failure raised by the library carries a machine-readable kind so the
 * HTTP layer can map it onto a status code without parsing messages.
 */
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace cspace

#endif

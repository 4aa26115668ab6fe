#include "cspace/error.hpp"

namespace cspace {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::UnknownScoringKind: return "UnknownScoringKind";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::UnknownWord: return "UnknownWord";
    case ErrorKind::UnknownConcept: return "UnknownConcept";
    case ErrorKind::DuplicateDescriptor: return "DuplicateDescriptor";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::Cancelled: return "Cancelled";
    case ErrorKind::LevelOutOfRange: return "LevelOutOfRange";
    case ErrorKind::StaleIndex: return "StaleIndex";
    case ErrorKind::NoConcepts: return "NoConcepts";
    case ErrorKind::DegenerateExtent: return "DegenerateExtent";
    case ErrorKind::UntrainedModel: return "UntrainedModel";
    case ErrorKind::ForbiddenAction: return "ForbiddenAction";
    case ErrorKind::UnknownTarget: return "UnknownTarget";
    case ErrorKind::LastConcept: return "LastConcept";
    case ErrorKind::EmptyQueue: return "EmptyQueue";
    case ErrorKind::JobAlreadyRunning: return "JobAlreadyRunning";
    case ErrorKind::ReplayDivergence: return "ReplayDivergence";
    case ErrorKind::UnknownSession: return "UnknownSession";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Error";
}

}  // namespace cspace

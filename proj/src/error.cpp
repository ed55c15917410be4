#include "glocal/error.hpp"

namespace glocal {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::DuplicateIndexInTriplet: return "DuplicateIndexInTriplet";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DuplicateItemId: return "DuplicateItemId";
    case ErrorKind::MissingLabel: return "MissingLabel";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::ConstantVector: return "ConstantVector";
    case ErrorKind::TemperatureNonPositive: return "TemperatureNonPositive";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyPartition: return "EmptyPartition";
    case ErrorKind::InsufficientClassExamples: return "InsufficientClassExamples";
    case ErrorKind::SingleClassInput: return "SingleClassInput";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::SingleClassLabels: return "SingleClassLabels";
    case ErrorKind::DegenerateRepresentation: return "DegenerateRepresentation";
    case ErrorKind::RankTooSmall: return "RankTooSmall";
    case ErrorKind::ConstantInput: return "ConstantInput";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::MalformedValue: return "MalformedValue";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

void raise(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace glocal

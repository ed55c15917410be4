#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace glocal {

enum class ErrorKind {
  MalformedHeader,
  DimensionMismatch,
  NonFiniteValue,
  IoFailure,
  DuplicateIndexInTriplet,
  IndexOutOfRange,
  InvalidArgument,
  DuplicateItemId,
  MissingLabel,
  ZeroVector,
  ConstantVector,
  TemperatureNonPositive,
  NonFiniteLoss,
  EmptyPartition,
  InsufficientClassExamples,
  SingleClassInput,
  KTooLarge,
  SingleClassLabels,
  DegenerateRepresentation,
  RankTooSmall,
  ConstantInput,
  SizeMismatch,
  MalformedValue,
};

std::string_view to_string(ErrorKind kind);

// Every module error carries a machine-readable kind; the CLI maps it to
// its error JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  // The message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& message);

}  // namespace glocal

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ecomem {

enum class ErrorCode {
  MissingColumn,
  NonContiguousTime,
  NonBinaryValue,
  MissingValue,
  InvalidValue,
  ZeroVariance,
  SeriesTooShort,
  InvalidSpec,
  InvalidDimension,
  ParseError,
  SingularGram,
  AllProposalsRejected,
  NonFiniteStart,
  InsufficientDraws,
  TermNotFound,
  ShapeMismatch,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonContiguousTime: return "NonContiguousTime";
    case ErrorCode::NonBinaryValue: return "NonBinaryValue";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::AllProposalsRejected: return "AllProposalsRejected";
    case ErrorCode::NonFiniteStart: return "NonFiniteStart";
    case ErrorCode::InsufficientDraws: return "InsufficientDraws";
    case ErrorCode::TermNotFound: return "TermNotFound";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

// Every failure the library reports is an Error carrying a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t position, std::string expected)
      : Error(ErrorCode::ParseError,
              "at position " + std::to_string(position) + ", expected " + expected),
        position_(position),
        expected_(std::move(expected)) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

}  // namespace ecomem

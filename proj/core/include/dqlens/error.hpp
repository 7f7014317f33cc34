#pragma once

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace dqlens {

// Every failure the engine can report. The service maps each code to one
// stable string and one HTTP status.
enum class ErrorCode {
  // relation facility
  EmptyInput,
  ArityMismatch,
  MalformedQuoting,
  DuplicateName,
  DuplicateColumn,
  InvalidOptions,
  UnknownRelation,
  CorruptWorkspace,
  // filter engine
  UnknownAttribute,
  TypeMismatch,
  InvalidFilter,
  UnknownItem,
  StaleFrame,
  RelationMismatch,
  // graphic engine
  ArityError,
  MissingOrdering,
  InvalidScene,
  ZoomOutOfDomain,
  // register engine
  LogUnavailable,
  UnknownFrame,
  UnknownSnapshot,
  DigestMismatch,
  // defect lab
  InvalidSchema,
  InvalidDefect,
  TargetTypeError,
  RateTooHigh,
  ZeroSpread,
  SingularCovariance,
  // service
  UnknownSession,
  NoRelations,
  NoScene,
  BadRequest,
  PayloadTooLarge,
};

std::string_view to_string(ErrorCode code);
int http_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json detail = nullptr)
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

}  // namespace dqlens

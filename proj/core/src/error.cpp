#include "dqlens/error.hpp"

namespace dqlens {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::MalformedQuoting: return "MalformedQuoting";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::DuplicateColumn: return "DuplicateColumn";
    case ErrorCode::InvalidOptions: return "InvalidOptions";
    case ErrorCode::UnknownRelation: return "UnknownRelation";
    case ErrorCode::CorruptWorkspace: return "CorruptWorkspace";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::InvalidFilter: return "InvalidFilter";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::StaleFrame: return "StaleFrame";
    case ErrorCode::RelationMismatch: return "RelationMismatch";
    case ErrorCode::ArityError: return "ArityError";
    case ErrorCode::MissingOrdering: return "MissingOrdering";
    case ErrorCode::InvalidScene: return "InvalidScene";
    case ErrorCode::ZoomOutOfDomain: return "ZoomOutOfDomain";
    case ErrorCode::LogUnavailable: return "LogUnavailable";
    case ErrorCode::UnknownFrame: return "UnknownFrame";
    case ErrorCode::UnknownSnapshot: return "UnknownSnapshot";
    case ErrorCode::DigestMismatch: return "DigestMismatch";
    case ErrorCode::InvalidSchema: return "InvalidSchema";
    case ErrorCode::InvalidDefect: return "InvalidDefect";
    case ErrorCode::TargetTypeError: return "TargetTypeError";
    case ErrorCode::RateTooHigh: return "RateTooHigh";
    case ErrorCode::ZeroSpread: return "ZeroSpread";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::NoRelations: return "NoRelations";
    case ErrorCode::NoScene: return "NoScene";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
  }
  return "Unknown";
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownRelation:
    case ErrorCode::UnknownItem:
    case ErrorCode::UnknownFrame:
    case ErrorCode::UnknownSnapshot:
    case ErrorCode::UnknownSession:
      return 404;
    case ErrorCode::DuplicateName:
    case ErrorCode::StaleFrame:
    case ErrorCode::RelationMismatch:
    case ErrorCode::NoRelations:
    case ErrorCode::NoScene:
    case ErrorCode::DigestMismatch:
      return 409;
    case ErrorCode::PayloadTooLarge:
      return 413;
    case ErrorCode::LogUnavailable:
      return 503;
    default:
      return 400;
  }
}

}  // namespace dqlens

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geocollab {

// Every failure the library reports is one of these codes. The names are also
// what goes on the wire in `error` payloads, so do not rename them casually.
enum class Errc {
  // protocol
  MalformedJson,
  UnknownKind,
  SchemaViolation,
  UnsupportedVersion,
  OversizeMessage,
  // geo_model
  DuplicateId,
  UnknownId,
  InvariantViolation,
  UnsupportedGeometry,
  ParseError,
  // session
  SessionFull,
  InvalidName,
  NotLeader,
  InvalidAction,
  UnknownParticipant,
  TargetDisconnected,
  NotQueued,
  AlreadyLeader,
  // analysis
  InvalidPoint,
  InvalidRadius,
  PoleProximity,
  SegmentTooLong,
  // review
  StoreFailure,
  UnknownSolution,
  UnknownParent,
  UnknownComment,
  ValidationError,
  // server / services
  UnknownService,
  ServiceTimeout,
  ServiceError,
  BindFailure,
  // client / harness
  ConnectFailure,
  ProtocolError,
  ScenarioInvalid,
  Timeout,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  Errc code() const noexcept { return code_; }
  // Offending field for SchemaViolation, upstream HTTP status for ServiceError.
  const std::string& field() const noexcept { return field_; }

 private:
  Errc code_;
  std::string field_;
};

}  // namespace geocollab

#include "geocollab/error.hpp"

namespace geocollab {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedJson: return "MalformedJson";
    case Errc::UnknownKind: return "UnknownKind";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::OversizeMessage: return "OversizeMessage";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::UnknownId: return "UnknownId";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::UnsupportedGeometry: return "UnsupportedGeometry";
    case Errc::ParseError: return "ParseError";
    case Errc::SessionFull: return "SessionFull";
    case Errc::InvalidName: return "InvalidName";
    case Errc::NotLeader: return "NotLeader";
    case Errc::InvalidAction: return "InvalidAction";
    case Errc::UnknownParticipant: return "UnknownParticipant";
    case Errc::TargetDisconnected: return "TargetDisconnected";
    case Errc::NotQueued: return "NotQueued";
    case Errc::AlreadyLeader: return "AlreadyLeader";
    case Errc::InvalidPoint: return "InvalidPoint";
    case Errc::InvalidRadius: return "InvalidRadius";
    case Errc::PoleProximity: return "PoleProximity";
    case Errc::SegmentTooLong: return "SegmentTooLong";
    case Errc::StoreFailure: return "StoreFailure";
    case Errc::UnknownSolution: return "UnknownSolution";
    case Errc::UnknownParent: return "UnknownParent";
    case Errc::UnknownComment: return "UnknownComment";
    case Errc::ValidationError: return "ValidationError";
    case Errc::UnknownService: return "UnknownService";
    case Errc::ServiceTimeout: return "ServiceTimeout";
    case Errc::ServiceError: return "ServiceError";
    case Errc::BindFailure: return "BindFailure";
    case Errc::ConnectFailure: return "ConnectFailure";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::ScenarioInvalid: return "ScenarioInvalid";
    case Errc::Timeout: return "Timeout";
  }
  return "Unknown";
}

}  // namespace geocollab

#include "undercut/error.hpp"

namespace undercut {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInstanceTooLarge: return "instance-too-large";
    case ErrorCode::kInvalidCandidate: return "invalid-candidate";
    case ErrorCode::kUnsplittable: return "unsplittable-within-size-limit";
    case ErrorCode::kInvalidShift: return "invalid-shift";
    case ErrorCode::kDegenerateRace: return "degenerate-race";
    case ErrorCode::kNoSample: return "no-sample";
    case ErrorCode::kStalled: return "stalled-simulation";
    case ErrorCode::kMalformedRow: return "malformed-row";
    case ErrorCode::kDuplicateId: return "duplicate-id";
    case ErrorCode::kNonPositiveSize: return "non-positive-size";
    case ErrorCode::kUnknownPreset: return "unknown-preset";
    case ErrorCode::kIo: return "io-failure";
  }
  return "unknown";
}

}  // namespace undercut

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace undercut {

enum class ErrorCode {
  kInvalidArgument,
  kInstanceTooLarge,
  kInvalidCandidate,
  kUnsplittable,
  kInvalidShift,
  kDegenerateRace,
  kNoSample,
  kStalled,
  kMalformedRow,
  kDuplicateId,
  kNonPositiveSize,
  kUnknownPreset,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch on the category without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace undercut

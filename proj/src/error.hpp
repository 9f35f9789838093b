#pragma once

#include <stdexcept>
#include <string>

namespace tracklens {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kParse,
  kFormat,
  kNotFound,
  kInconsistent,
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tracklens

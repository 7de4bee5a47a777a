#pragma once

#include <stdexcept>
#include <string>

namespace siftkit {

enum class ErrorCode {
  invalid_argument,
  not_found,
  io,
  parse,
  empty_vocabulary,
  empty_result,
  conflict,
};

// Single exception type for the library; `code()` lets the server and CLI
// map failures onto status codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

const char* to_string(ErrorCode code) noexcept;

}  // namespace siftkit

#pragma once

#include <stdexcept>
#include <string>

namespace pamlab {

enum class ErrorCode {
  ok = 0,
  parameter = 1,
  invalid_site = 2,
  convergence = 3,
  regime = 4,
  spectrum_collision = 5,
  input = 6,
  stiffness = 7,
  degenerate_spectrum = 8,
  sample_size = 9,
  tolerance = 10,
  io = 11,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace pamlab

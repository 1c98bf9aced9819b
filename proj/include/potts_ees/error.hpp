#pragma once

#include <stdexcept>
#include <string>

namespace potts {

// Failure categories surfaced through the C API as status codes.
enum class ErrorKind {
  invalid_argument,
  out_of_range,
  not_reversible,
  no_convergence,
  premise_failed,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::invalid_argument, what);
}

}  // namespace potts

#pragma once

#include <stdexcept>
#include <string>

namespace codelm {

enum class ErrorKind {
  invalid_argument,
  io,
  lex,
  corpus,
  vocab_mismatch,
  numeric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace codelm

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stegolstm {

/// Coarse error classes. The CLI prints the class name as the first field of
/// its one-line diagnostic, so these strings are part of the interface.
enum class ErrorKind {
  invalid_argument,
  format,
  hash_mismatch,
  vocabulary,
  decode,
  training,
  io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::format:           return "format";
    case ErrorKind::hash_mismatch:    return "hash_mismatch";
    case ErrorKind::vocabulary:       return "vocabulary";
    case ErrorKind::decode:           return "decode";
    case ErrorKind::training:         return "training";
    case ErrorKind::io:               return "io";
  }
  return "unknown";
}

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

}  // namespace stegolstm

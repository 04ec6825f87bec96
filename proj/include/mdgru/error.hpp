// Error taxonomy shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace mdgru {

enum class ErrorKind {
  Shape,      // tensor shapes incompatible
  Dimension,  // extent/stride divisibility violated
  Index,      // index out of range
  State,      // operation called in an invalid state (e.g. backward before forward)
  Format,     // malformed binary file
  Parse,      // malformed text file
  Config,     // invalid or unknown configuration
  Contract,   // API contract violated (e.g. mixing coordinate spaces)
  Runtime,    // anything else (NaN loss, missing file, ...)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_error(ErrorKind k, const std::string& msg) {
  throw Error(k, msg);
}

[[noreturn]] inline void throw_shape(const std::string& msg) { throw_error(ErrorKind::Shape, msg); }
[[noreturn]] inline void throw_dim(const std::string& msg) { throw_error(ErrorKind::Dimension, msg); }
[[noreturn]] inline void throw_index(const std::string& msg) { throw_error(ErrorKind::Index, msg); }
[[noreturn]] inline void throw_state(const std::string& msg) { throw_error(ErrorKind::State, msg); }
[[noreturn]] inline void throw_format(const std::string& msg) { throw_error(ErrorKind::Format, msg); }
[[noreturn]] inline void throw_parse(const std::string& msg) { throw_error(ErrorKind::Parse, msg); }
[[noreturn]] inline void throw_config(const std::string& msg) { throw_error(ErrorKind::Config, msg); }
[[noreturn]] inline void throw_contract(const std::string& msg) { throw_error(ErrorKind::Contract, msg); }

}  // namespace mdgru

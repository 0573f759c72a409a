#pragma once

#include <stdexcept>
#include <string>

namespace scdonor {

// Validation errors are caller mistakes (bad config, bad file); numerical
// errors are failures of an otherwise well-posed computation. The CLI maps
// them to exit codes 2 and 3.
enum class ErrorKind { validation, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_validation(const std::string& msg) {
  throw Error(ErrorKind::validation, msg);
}

[[noreturn]] inline void throw_numerical(const std::string& msg) {
  throw Error(ErrorKind::numerical, msg);
}

}  // namespace scdonor

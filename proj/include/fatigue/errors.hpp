#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace fatigue {

// Raised when arguments violate a documented precondition (bad shapes,
// out-of-range values, empty inputs).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an object is used in the wrong lifecycle state, e.g. backward
// before forward or reading a window that has not filled yet.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

template <typename... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

template <typename... Args>
[[noreturn]] void reject(const Args&... args) {
  throw InputError(concat(args...));
}

}  // namespace detail
}  // namespace fatigue

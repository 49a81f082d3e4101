#pragma once

#include <stdexcept>
#include <string>

namespace frk {

/// Error categories; each maps onto a CLI exit code.
enum class ErrorKind {
  config,     // bad configuration, forbidden family/link, missing inputs
  geometry,   // degenerate or disjoint geometry
  domain,     // parameter or data outside its admissible domain
  numerical,  // non-convergence, failed factorization
  io,         // file access or parse failure
  state,      // object used before it is ready
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return {ErrorKind::config, msg}; }
inline Error geometry_error(const std::string& msg) { return {ErrorKind::geometry, msg}; }
inline Error domain_error(const std::string& msg) { return {ErrorKind::domain, msg}; }
inline Error numerical_error(const std::string& msg) { return {ErrorKind::numerical, msg}; }
inline Error io_error(const std::string& msg) { return {ErrorKind::io, msg}; }
inline Error state_error(const std::string& msg) { return {ErrorKind::state, msg}; }

/// Exit code used by the command-line tool for an error of this kind.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::geometry:
    case ErrorKind::domain:
      return 2;
    case ErrorKind::numerical:
    case ErrorKind::state:
      return 3;
    case ErrorKind::io:
      return 4;
  }
  return 3;
}

}  // namespace frk

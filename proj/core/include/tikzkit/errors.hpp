#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tikzkit {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller handed us something that violates an operation's precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration. Collects every violation rather than the first one.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  explicit ConfigError(const std::string& violation)
      : ConfigError(std::vector<std::string>{violation}) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// A required external tool (compiler, rasterizer, provider) is missing.
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

// Filesystem / process plumbing failed; not attributable to a sample.
class InfrastructureError : public Error {
 public:
  using Error::Error;
};

// A remote endpoint could not be reached or answered with an error.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int status = 0)
      : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

}  // namespace tikzkit

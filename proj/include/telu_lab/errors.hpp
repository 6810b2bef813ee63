#pragma once

#include <stdexcept>
#include <string>

namespace telu_lab {

// Bad run-config, override, layer stack or CLI argument. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed dataset file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// First non-finite value seen during a forward/backward pass or optimizer step.
// Training code catches this and records it as data.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. running backward twice on the same tape.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace telu_lab

#pragma once

#include <stdexcept>
#include <string>

namespace seqnav {

// Caller broke a documented precondition; always a programming error.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// TURN_BACK_LAST_STEP was requested with an empty pose stack.
class RollbackUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No grid path exists between two free cells.
class UnreachableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scene or episode generation could not satisfy the requested parameters.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Remote similarity/LLM service failed (transport, timeout, malformed body).
// Callers must surface or retry; never substitute a silent default score.
class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration; message carries a field path like "eav.threshold".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file input; message names the offending line where applicable.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const char* msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace detail

}  // namespace seqnav

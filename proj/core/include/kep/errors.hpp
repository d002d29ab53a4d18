#pragma once

#include <stdexcept>
#include <string>

namespace kep {

class KepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller-supplied data violates a precondition.
class InputError : public KepError {
 public:
  using KepError::KepError;
};

// Fewer than tau distinct partial decryptions were supplied.
class ThresholdError : public KepError {
 public:
  using KepError::KepError;
};

// The session must be abandoned; no party output is produced.
class ProtocolAbort : public KepError {
 public:
  using KepError::KepError;
};

class TransportError : public KepError {
 public:
  using KepError::KepError;
};

// A structural invariant of a data object does not hold.
class InvariantError : public KepError {
 public:
  using KepError::KepError;
};

// Decoded protocol data is inconsistent (e.g. an ambiguous prime product).
class CorruptionError : public ProtocolAbort {
 public:
  using ProtocolAbort::ProtocolAbort;
};

}  // namespace kep

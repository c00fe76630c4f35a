#pragma once

#include <stdexcept>
#include <string>

namespace conther {

/// Violated precondition on an API call (wrong sizes, bad arguments).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Tensor shape mismatch. The message names both shapes.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// A NaN or infinity reached a place where the run cannot continue.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sampling was requested from a buffer that cannot serve it yet.
class NotReadyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration key or value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or oversized frame on the env wire protocol.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed checkpoint or buffer dump file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace conther

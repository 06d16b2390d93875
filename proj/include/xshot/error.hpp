#pragma once

#include <stdexcept>
#include <string>

namespace xshot {

/// Base class for every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure talking to a remote model or translator after retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace xshot

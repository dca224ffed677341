#pragma once

#include <stdexcept>
#include <string>

namespace castscan {

/// Base of every error raised by the library. Callers that only need to
/// isolate a failing video catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Image or video could not be decoded.
class DecodeError : public Error {
 public:
  using Error::Error;
};

class EmptySequenceError : public Error {
 public:
  using Error::Error;
};

/// Worker violated the wire protocol (bad handshake, malformed record).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public Error {
 public:
  using Error::Error;
};

/// Worker process died. Restartable once per session.
class WorkerCrashError : public Error {
 public:
  using Error::Error;
};

/// Classification of a specific frame failed (worker error record etc).
class ClassifyError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

/// Process spawn failures, unwritable directories.
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

}  // namespace castscan

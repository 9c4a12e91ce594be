#ifndef TKGQA_ERROR_H_
#define TKGQA_ERROR_H_

#include <stdexcept>
#include <string>

namespace tkgqa {

// Base class for every error raised by the library. Messages are meant for
// operators: they name the offending file, line, label or field.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Raised when a training loop produces a non-finite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what, int status = 0)
      : Error(what), status_(status) {}

  // HTTP status of the last attempt, 0 when no response was received.
  int status() const { return status_; }

 private:
  int status_;
};

}  // namespace tkgqa

#endif  // TKGQA_ERROR_H_

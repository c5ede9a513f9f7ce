#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace softorgan {

// Base of every error the library throws. Callers that only need a message
// can catch this; the subclasses carry the structured detail.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FileNotFound : public Error {
 public:
  explicit FileNotFound(const std::string& path)
      : Error("file not found: " + path), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class WidthMismatch : public Error {
 public:
  WidthMismatch(std::size_t expected, std::size_t found)
      : Error("frame width mismatch: expected " + std::to_string(expected) +
              ", found " + std::to_string(found)),
        expected_(expected),
        found_(found) {}
  std::size_t expected() const { return expected_; }
  std::size_t found() const { return found_; }

 private:
  std::size_t expected_;
  std::size_t found_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DegenerateMesh : public Error {
 public:
  using Error::Error;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

// Configuration rejected by the stability gate before any stepping.
class InstabilityRisk : public Error {
 public:
  using Error::Error;
};

// Raised by the stepper when a velocity blows up or a position goes
// non-finite. The state is left at the last good substep and flagged halted.
class InstabilityDetected : public Error {
 public:
  using Error::Error;
};

class TooFewSamples : public Error {
 public:
  using Error::Error;
};

class MissingBinding : public Error {
 public:
  using Error::Error;
};

}  // namespace softorgan

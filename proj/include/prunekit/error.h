#ifndef PRUNEKIT_ERROR_H_
#define PRUNEKIT_ERROR_H_

#include <stdexcept>
#include <string>

namespace prunekit {

// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInvalidInput,     // malformed files, bad arguments, schema violations
  kIntegrity,        // structurally inconsistent data (cycles, split overlap)
  kInfeasible,       // a well-formed request that cannot be satisfied
  kUndefined,        // a metric or score that is mathematically undefined
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Malformed text input; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string &what, long line = 0)
      : Error(ErrorKind::kInvalidInput,
              line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string &what)
      : Error(ErrorKind::kInvalidInput, what) {}
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string &what)
      : Error(ErrorKind::kInvalidInput, what) {}
};

class InvalidOperation : public Error {
 public:
  explicit InvalidOperation(const std::string &what)
      : Error(ErrorKind::kInvalidInput, what) {}
};

class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string &what)
      : Error(ErrorKind::kIntegrity, what) {}
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string &what)
      : Error(ErrorKind::kIntegrity, what) {}
};

class UndefinedScore : public Error {
 public:
  explicit UndefinedScore(const std::string &what)
      : Error(ErrorKind::kUndefined, what) {}
};

class UndefinedMetric : public Error {
 public:
  explicit UndefinedMetric(const std::string &what)
      : Error(ErrorKind::kUndefined, what) {}
};

class DegenerateData : public Error {
 public:
  explicit DegenerateData(const std::string &what)
      : Error(ErrorKind::kInvalidInput, what) {}
};

class LookupError : public Error {
 public:
  explicit LookupError(const std::string &what)
      : Error(ErrorKind::kInvalidInput, what) {}
};

class InvalidChain : public Error {
 public:
  explicit InvalidChain(const std::string &what)
      : Error(ErrorKind::kInvalidInput, what) {}
};

// A JSON-lines record that does not match the schema; `record` is 1-based.
class SchemaError : public Error {
 public:
  SchemaError(const std::string &what, long record)
      : Error(ErrorKind::kInvalidInput, "record " + std::to_string(record) + ": " + what),
        record_(record) {}
  long record() const { return record_; }

 private:
  long record_;
};

class NoFeasibleCandidate : public Error {
 public:
  explicit NoFeasibleCandidate(const std::string &what)
      : Error(ErrorKind::kInfeasible, what) {}
};

}  // namespace prunekit

#endif  // PRUNEKIT_ERROR_H_

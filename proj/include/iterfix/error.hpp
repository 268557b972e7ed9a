#pragma once

#include <stdexcept>
#include <string>

namespace iterfix {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Manifest could not be read or violates an invariant.
class ManifestError : public Error {
 public:
  ManifestError(std::string problem_id, std::string field, const std::string& what)
      : Error(format(problem_id, field, what)),
        problem_id_(std::move(problem_id)),
        field_(std::move(field)) {}

  const std::string& problem_id() const { return problem_id_; }
  const std::string& field() const { return field_; }

 private:
  static std::string format(const std::string& id, const std::string& field,
                            const std::string& what) {
    std::string out = "manifest";
    if (!id.empty()) out += " problem '" + id + "'";
    if (!field.empty()) out += " field '" + field + "'";
    return out + ": " + what;
  }

  std::string problem_id_;
  std::string field_;
};

class TestLookupError : public Error {
 public:
  explicit TestLookupError(std::string name)
      : Error("unknown test '" + name + "'"), name_(std::move(name)) {}
  const std::string& test_name() const { return name_; }

 private:
  std::string name_;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

class TranscriptError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

// Backend returned fewer ranked outputs than requested.
class ShortResponseError : public BackendError {
 public:
  ShortResponseError(std::size_t requested, std::size_t received)
      : BackendError("backend returned " + std::to_string(received) + " of " +
                     std::to_string(requested) + " requested outputs"),
        requested_(requested),
        received_(received) {}
  std::size_t requested() const { return requested_; }
  std::size_t received() const { return received_; }

 private:
  std::size_t requested_;
  std::size_t received_;
};

class FixtureMissError : public BackendError {
 public:
  FixtureMissError(std::string problem_id, std::size_t turn)
      : BackendError("fixture has no entry for problem '" + problem_id + "' turn " +
                     std::to_string(turn)),
        problem_id_(std::move(problem_id)),
        turn_(turn) {}
  const std::string& problem_id() const { return problem_id_; }
  std::size_t turn() const { return turn_; }

 private:
  std::string problem_id_;
  std::size_t turn_;
};

class SpliceError : public Error {
 public:
  using Error::Error;
};

// Validation could not reach a verdict: workspace setup failed or the
// harness output did not match the configured report format.
class InfrastructureError : public Error {
 public:
  using Error::Error;
};

class RecordError : public Error {
 public:
  using Error::Error;
};

class AnalyticsError : public Error {
 public:
  using Error::Error;
};

}  // namespace iterfix

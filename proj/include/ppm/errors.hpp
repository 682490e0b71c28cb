#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ppm {

enum class ErrorKind {
  Format,         // malformed input file
  EmptyLog,       // event log without events
  Vocabulary,     // unknown activity name or id
  Length,         // trace does not fit the padded length
  Split,          // too few traces for a train/validation/test split
  Connectivity,   // ontology graph is not connected
  Parameter,      // invalid numeric argument
  Index,          // id out of range
  Shape,          // tensor shape disagreement
  Config,         // invalid or inconsistent configuration
  Evaluation,     // nothing to evaluate
  Aggregation,    // reports cannot be merged
  Numeric,        // divergence (NaN / Inf)
  Io,             // file system failure
  Compatibility,  // checkpoint and data disagree
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit code for an error: 1 usage/config, 2 data, 3 numeric.
int exit_code_for(ErrorKind kind);

}  // namespace ppm

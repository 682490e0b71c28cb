#include "ppm/errors.hpp"

namespace ppm {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Format: return "format error";
    case ErrorKind::EmptyLog: return "empty-log error";
    case ErrorKind::Vocabulary: return "vocabulary error";
    case ErrorKind::Length: return "length error";
    case ErrorKind::Split: return "split error";
    case ErrorKind::Connectivity: return "connectivity error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Index: return "index error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Evaluation: return "evaluation error";
    case ErrorKind::Aggregation: return "aggregation error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Compatibility: return "compatibility error";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parameter:
    case ErrorKind::Config:
      return 1;
    case ErrorKind::Numeric:
      return 3;
    default:
      return 2;
  }
}

}  // namespace ppm

#pragma once

#include <stdexcept>
#include <string>

namespace hypergreen {

enum class ErrorKind {
  Config,
  Domain,
  Alignment,
  Depth,
  Dimension,
  Gap,
  Budget,
  Numerical,
  Stability,
  Hyperbolicity,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::Depth: return "depth";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Gap: return "gap";
    case ErrorKind::Budget: return "budget";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Stability: return "stability";
    case ErrorKind::Hyperbolicity: return "hyperbolicity";
  }
  return "unknown";
}

// CLI exit code associated with an error kind: 2 config, 3 budget, 4 numerical.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Budget: return 3;
    case ErrorKind::Numerical:
    case ErrorKind::Stability:
    case ErrorKind::Hyperbolicity: return 4;
    default: return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace hypergreen

#pragma once

#include <stdexcept>
#include <string>

namespace coxthin {

// Error categories map one-to-one onto CLI exit codes (see tools/coxthin.cpp).
enum class ErrorKind {
  config,       // bad or inconsistent configuration / missing files named there
  data,         // schema, parse, validation, geometry, shape, out-of-domain
  numeric,      // overflow, failed factorization after jitter escalation
  convergence,  // optimizer hit its iteration cap
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(ErrorKind::config, msg) {}
};
struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(ErrorKind::data, msg) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};
struct ConvergenceError : Error {
  ConvergenceError(const std::string& msg, double best_objective)
      : Error(ErrorKind::convergence, msg), best_objective(best_objective) {}
  double best_objective;
};

}  // namespace coxthin

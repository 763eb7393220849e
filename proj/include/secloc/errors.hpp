#ifndef SECLOC_ERRORS_HPP
#define SECLOC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace secloc {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// An argument lies outside the domain of the function (negative distance,
/// non-finite power, zero noise where a density is requested, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or unsupported configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Anchor geometry does not determine a position (collinear, rank deficient,
/// or ill-conditioned normal equations).
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class InsufficientAnchors : public Error {
 public:
  using Error::Error;
};

/// Too few anchors left after malicious-anchor elimination.
class InsufficientSurvivors : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace secloc

#endif  // SECLOC_ERRORS_HPP

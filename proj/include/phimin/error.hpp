#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phimin {

enum class ErrorKind {
  Domain,
  Family,
  UnsupportedFamily,
  AxisSingularity,
  AxisCollision,
  DomainExit,
  Stencil,
  UnsupportedCombination,
  Precondition,
  Umbilic,
  Support,
  SignViolation,
  NonConvergence,
  PatchExceeded,
  Normalization,
  WindowUnderflow,
  OriginProximity,
  Parse,
  Schema,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Family: return "family";
    case ErrorKind::UnsupportedFamily: return "unsupported-family";
    case ErrorKind::AxisSingularity: return "axis-singularity";
    case ErrorKind::AxisCollision: return "axis-collision";
    case ErrorKind::DomainExit: return "domain-exit";
    case ErrorKind::Stencil: return "stencil";
    case ErrorKind::UnsupportedCombination: return "unsupported-combination";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Umbilic: return "umbilic-everywhere";
    case ErrorKind::Support: return "support-violation";
    case ErrorKind::SignViolation: return "sign-violation";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::PatchExceeded: return "patch-exceeded";
    case ErrorKind::Normalization: return "normalization";
    case ErrorKind::WindowUnderflow: return "window-underflow";
    case ErrorKind::OriginProximity: return "origin-proximity";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind and the module that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string_view module, const std::string& message)
      : std::runtime_error(std::string(module) + ": " + std::string(to_string(kind)) + " error: " +
                           message),
        kind_(kind),
        module_(module) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

}  // namespace phimin

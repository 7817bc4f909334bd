#pragma once

#include <stdexcept>
#include <string>

namespace linet {

/// Broad failure class; the CLI maps each to a process exit code.
enum class ErrorKind { config, data, dependency, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define LINET_DEFINE_ERROR(Name, Kind)                                           \
  class Name : public Error {                                                    \
   public:                                                                       \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, #Name ": " + what) {} \
  };

LINET_DEFINE_ERROR(ShapeMismatch, numeric)
LINET_DEFINE_ERROR(NumericalError, numeric)
LINET_DEFINE_ERROR(FeatureError, numeric)
LINET_DEFINE_ERROR(WindowTooLarge, numeric)

LINET_DEFINE_ERROR(ConfigError, config)
LINET_DEFINE_ERROR(ResolutionTooSmall, config)
LINET_DEFINE_ERROR(ParamOutOfRange, config)
LINET_DEFINE_ERROR(PoseOutOfRange, config)

LINET_DEFINE_ERROR(DegenerateLandmarks, data)
LINET_DEFINE_ERROR(IngestError, data)
LINET_DEFINE_ERROR(ParseError, data)
LINET_DEFINE_ERROR(SplitError, data)
LINET_DEFINE_ERROR(PairingError, data)
LINET_DEFINE_ERROR(NoPoseReference, data)

LINET_DEFINE_ERROR(DependencyError, dependency)
LINET_DEFINE_ERROR(VersionError, dependency)

#undef LINET_DEFINE_ERROR

}  // namespace linet

#pragma once

#include <stdexcept>
#include <string>

namespace folilab {

enum class ErrorKind {
  non_immersion,
  ill_conditioned,
  not_tangent,
  invalid_params,
  unsupported_drift,
  bump_too_large,
  empty_ensemble,
  weight_degeneracy,
  config,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace folilab

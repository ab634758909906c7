#include "folilab/errors.hpp"

namespace folilab {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::non_immersion: return "NonImmersion";
    case ErrorKind::ill_conditioned: return "IllConditioned";
    case ErrorKind::not_tangent: return "NotTangent";
    case ErrorKind::invalid_params: return "InvalidParams";
    case ErrorKind::unsupported_drift: return "UnsupportedDrift";
    case ErrorKind::bump_too_large: return "BumpTooLarge";
    case ErrorKind::empty_ensemble: return "EmptyEnsemble";
    case ErrorKind::weight_degeneracy: return "WeightDegeneracy";
    case ErrorKind::config: return "ConfigError";
  }
  return "Error";
}

}  // namespace folilab

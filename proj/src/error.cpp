#include "pamlab/error.hpp"

namespace pamlab {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ok: return "ok";
    case ErrorCode::parameter: return "ParameterError";
    case ErrorCode::invalid_site: return "InvalidSite";
    case ErrorCode::convergence: return "ConvergenceError";
    case ErrorCode::regime: return "RegimeError";
    case ErrorCode::spectrum_collision: return "SpectrumCollision";
    case ErrorCode::input: return "InputError";
    case ErrorCode::stiffness: return "StiffnessError";
    case ErrorCode::degenerate_spectrum: return "DegenerateSpectrum";
    case ErrorCode::sample_size: return "SampleSizeError";
    case ErrorCode::tolerance: return "ToleranceError";
    case ErrorCode::io: return "IOError";
  }
  return "UnknownError";
}

}  // namespace pamlab

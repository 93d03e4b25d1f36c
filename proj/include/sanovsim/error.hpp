#ifndef SANOVSIM_ERROR_HPP
#define SANOVSIM_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sanovsim {

enum class Errc {
  invalid_argument,
  label_mismatch,
  dimension_mismatch,
  empty_sample,
  missing_context,
  infeasible,
  solver_stall,
  negative_image,
  signed_normalization_failure,
  negative_net_mass,
  too_large,
  zero_probability,
  singular_covariance,
  shape_violation,
  invalid_config,
  non_convergence,
  step_too_large,
  internal_inconsistency,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::label_mismatch: return "LabelMismatch";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_sample: return "EmptySample";
    case Errc::missing_context: return "MissingContext";
    case Errc::infeasible: return "Infeasible";
    case Errc::solver_stall: return "SolverStall";
    case Errc::negative_image: return "NegativeImage";
    case Errc::signed_normalization_failure: return "SignedNormalizationFailure";
    case Errc::negative_net_mass: return "NegativeNetMass";
    case Errc::too_large: return "TooLarge";
    case Errc::zero_probability: return "ZeroProbability";
    case Errc::singular_covariance: return "SingularCovariance";
    case Errc::shape_violation: return "ShapeViolation";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::non_convergence: return "NonConvergence";
    case Errc::step_too_large: return "StepTooLarge";
    case Errc::internal_inconsistency: return "InternalInconsistency";
  }
  return "Unknown";
}

/// Library exception. `values()` carries numeric context when the failure
/// has some (e.g. the raw net masses behind a NegativeNetMass).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::vector<double> values = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        values_(std::move(values)) {}

  Errc code() const noexcept { return code_; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  Errc code_;
  std::vector<double> values_;
};

}  // namespace sanovsim

#endif  // SANOVSIM_ERROR_HPP

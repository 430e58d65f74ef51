#pragma once

#include <stdexcept>
#include <string>

namespace gaga {

// Failure identities named by the public contracts. Data errors map to CLI
// exit code 2, numeric errors to exit code 3.
enum class errc {
  non_positive_value,
  non_finite_value,
  duplicate_id,
  shape_mismatch,
  wrong_arity,
  non_integer_code,
  first_pattern_not_null,
  duplicate_pattern,
  unknown_array,
  missing_array,
  duplicate_array,
  group_empty,
  parse_error,
  degenerate_data,
  too_few_replicates,
  no_true_de,
  domain_error,
  integrability_violation,
  approx_degenerate,
  refine_failed,
  quadrature_non_convergence,
  non_finite_objective,
  moment_undefined,
  all_clusters_pruned,
};

inline const char* errc_name(errc c) noexcept {
  switch (c) {
    case errc::non_positive_value: return "NonPositiveValue";
    case errc::non_finite_value: return "NonFiniteValue";
    case errc::duplicate_id: return "DuplicateId";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::wrong_arity: return "WrongArity";
    case errc::non_integer_code: return "NonIntegerCode";
    case errc::first_pattern_not_null: return "FirstPatternNotNull";
    case errc::duplicate_pattern: return "DuplicatePattern";
    case errc::unknown_array: return "UnknownArray";
    case errc::missing_array: return "MissingArray";
    case errc::duplicate_array: return "DuplicateArray";
    case errc::group_empty: return "GroupEmpty";
    case errc::parse_error: return "ParseError";
    case errc::degenerate_data: return "DegenerateData";
    case errc::too_few_replicates: return "TooFewReplicates";
    case errc::no_true_de: return "NoTrueDE";
    case errc::domain_error: return "DomainError";
    case errc::integrability_violation: return "IntegrabilityViolation";
    case errc::approx_degenerate: return "ApproxDegenerate";
    case errc::refine_failed: return "RefineFailed";
    case errc::quadrature_non_convergence: return "QuadratureNonConvergence";
    case errc::non_finite_objective: return "NonFiniteObjective";
    case errc::moment_undefined: return "MomentUndefined";
    case errc::all_clusters_pruned: return "AllClustersPruned";
  }
  return "UnknownError";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

// Invalid or malformed input.
class data_error : public error {
 public:
  using error::error;
};

// Numerical failure inside a computation.
class numeric_error : public error {
 public:
  using error::error;
};

}  // namespace gaga

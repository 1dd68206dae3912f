#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace geodecomp {

/// Base class for all domain errors. Carries a stable machine-readable code
/// (snake_case) and an optional key/value context, so callers (notably the
/// CLI) can surface structured error objects.
class Error : public std::runtime_error {
 public:
  using Context = std::map<std::string, std::string>;

  Error(std::string code, const std::string& message, Context context = {})
      : std::runtime_error(message), code_(std::move(code)), context_(std::move(context)) {}

  const std::string& code() const noexcept { return code_; }
  const Context& context() const noexcept { return context_; }

 private:
  std::string code_;
  Context context_;
};

#define GEODECOMP_DEFINE_ERROR(ClassName, code_string)                          \
  class ClassName : public Error {                                             \
   public:                                                                     \
    explicit ClassName(const std::string& message, Context context = {})       \
        : Error(code_string, message, std::move(context)) {}                   \
  }

GEODECOMP_DEFINE_ERROR(DimensionError, "dimension_error");
GEODECOMP_DEFINE_ERROR(ManifoldViolation, "manifold_violation");
GEODECOMP_DEFINE_ERROR(CutLocusError, "cut_locus_error");
GEODECOMP_DEFINE_ERROR(DegenerateInput, "degenerate_input");
GEODECOMP_DEFINE_ERROR(EmptyInput, "empty_input");
GEODECOMP_DEFINE_ERROR(StructureError, "structure_error");
GEODECOMP_DEFINE_ERROR(DegenerateNoise, "degenerate_noise");
GEODECOMP_DEFINE_ERROR(CoverageError, "coverage_error");
GEODECOMP_DEFINE_ERROR(UnknownPrimitive, "unknown_primitive");
GEODECOMP_DEFINE_ERROR(MissingAnchor, "missing_anchor");
GEODECOMP_DEFINE_ERROR(ConfigError, "config_error");
GEODECOMP_DEFINE_ERROR(TuningError, "tuning_error");
GEODECOMP_DEFINE_ERROR(OracleDivergence, "oracle_divergence");
GEODECOMP_DEFINE_ERROR(FormatError, "format_error");
GEODECOMP_DEFINE_ERROR(TruncationError, "truncation_error");
GEODECOMP_DEFINE_ERROR(DataError, "data_error");
GEODECOMP_DEFINE_ERROR(AlignmentError, "alignment_error");
GEODECOMP_DEFINE_ERROR(DivisionByZero, "division_by_zero");

#undef GEODECOMP_DEFINE_ERROR

}  // namespace geodecomp

#pragma once

#include <stdexcept>
#include <string>

namespace mlpbsde {

/// Base of every error raised by the library. Callers that do not care about
/// the specific failure can catch this alone.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MLPBSDE_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                      \
    public:                                                          \
        explicit Name(const std::string& what) : Error(what) {}      \
    }

MLPBSDE_DEFINE_ERROR(InvalidOrder);
MLPBSDE_DEFINE_ERROR(DegenerateInterval);
MLPBSDE_DEFINE_ERROR(NonFiniteValue);
MLPBSDE_DEFINE_ERROR(InvalidVariance);
MLPBSDE_DEFINE_ERROR(InvalidTime);
MLPBSDE_DEFINE_ERROR(InvalidConfig);
MLPBSDE_DEFINE_ERROR(UnknownProblem);
MLPBSDE_DEFINE_ERROR(TheoremNotApplicable);
MLPBSDE_DEFINE_ERROR(MissingBounds);
MLPBSDE_DEFINE_ERROR(OracleUnavailable);

#undef MLPBSDE_DEFINE_ERROR

} // namespace mlpbsde

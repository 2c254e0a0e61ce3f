#pragma once

#include <stdexcept>

namespace cdl {

/// Base class for all library errors.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CDL_DEFINE_ERROR(name)           \
  class name : public error {            \
   public:                               \
    using error::error;                  \
  };

CDL_DEFINE_ERROR(domain_error)           // argument outside the operation's domain
CDL_DEFINE_ERROR(pole_error)             // hypergeometric lower parameter hit a pole
CDL_DEFINE_ERROR(convergence_error)      // iterative solver failed to converge
CDL_DEFINE_ERROR(truncation_error)       // series tail bound not met within max_terms
CDL_DEFINE_ERROR(precision_loss)         // alternating-series cancellation exceeded budget
CDL_DEFINE_ERROR(combinatorial_limit)    // composition enumeration exceeded the configured cap
CDL_DEFINE_ERROR(branch_error)           // square-root branch argument went negative
CDL_DEFINE_ERROR(step_size_error)        // SDE step size fails the drift validity check
CDL_DEFINE_ERROR(divergent_lambda)       // total jump rate of the subordinator diverges
CDL_DEFINE_ERROR(non_terminating_series) // non-terminating 2F1 outside its convergence region
CDL_DEFINE_ERROR(io_error)               // file format or filesystem failure

#undef CDL_DEFINE_ERROR

}  // namespace cdl

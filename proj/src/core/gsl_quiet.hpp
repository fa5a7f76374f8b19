#pragma once

#include <gsl/gsl_errno.h>

namespace kappa::detail {

// GSL aborts on domain errors by default; the library checks return values
// and results itself, so the handler is switched off once per process.
inline void quiet_gsl() {
  static const bool done = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)done;
}

}  // namespace kappa::detail

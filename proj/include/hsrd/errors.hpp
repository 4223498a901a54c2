#pragma once

#include <stdexcept>
#include <string>

namespace hsrd {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct dimension_error : error { using error::error; };
struct layout_error : error { using error::error; };
struct shape_error : error { using error::error; };
struct not_a_state_error : error { using error::error; };
struct validation_error : error { using error::error; };
struct domain_error : error { using error::error; };
struct scenario_error : error { using error::error; };
struct plan_error : error { using error::error; };

// Raised when an SDP does not reach optimal status.  Carries a dump of the
// offending problem so callers can log it.
struct solver_error : error {
  std::string dump;
  solver_error(const std::string &what, std::string problem_dump = {})
      : error(what), dump(std::move(problem_dump)) {}
};

}  // namespace hsrd

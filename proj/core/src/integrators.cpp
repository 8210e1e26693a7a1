#include "batchrl/integrators.hpp"

namespace batchrl::detail {

void require_step(double dt, int substeps) {
  if (!(dt > 0.0)) {
    throw ConfigError("integrator step must be positive, got " + std::to_string(dt));
  }
  if (substeps < 1) {
    throw ConfigError("integrator needs at least one substep, got " + std::to_string(substeps));
  }
}

}  // namespace batchrl::detail

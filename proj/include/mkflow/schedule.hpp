#pragma once

#include <algorithm>

#include "mkflow/errors.hpp"

namespace mkflow {

// dt_0, then dt_{j+1} = min(growth * dt_j, dt_cap).
struct StepSchedule {
  double dt0 = 1e-2;
  double growth = 1.01;
  double dt_cap = 0.25;

  void validate() const {
    if (!(dt0 > 0.0) || !(growth >= 1.0) || !(dt_cap >= dt0)) {
      throw ContractError("[dynamics] invalid step schedule");
    }
  }

  double next(double dt) const { return std::min(growth * dt, dt_cap); }
};

}  // namespace mkflow

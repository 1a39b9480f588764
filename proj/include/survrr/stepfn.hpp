#pragma once

#include <algorithm>
#include <vector>

namespace survrr {

// Right-continuous step function: value_at0 on [0, knots[0]), values[k] on
// [knots[k], knots[k+1]). Knots strictly increasing.
struct StepFn {
  std::vector<double> knots;
  std::vector<double> values;
  double value_at0 = 0.0;

  double eval(double t) const {
    const auto it = std::upper_bound(knots.begin(), knots.end(), t);
    if (it == knots.begin()) return value_at0;
    return values[static_cast<std::size_t>(it - knots.begin()) - 1];
  }

  // Left limit: value just before t.
  double eval_left(double t) const {
    const auto it = std::lower_bound(knots.begin(), knots.end(), t);
    if (it == knots.begin()) return value_at0;
    return values[static_cast<std::size_t>(it - knots.begin()) - 1];
  }
};

}  // namespace survrr

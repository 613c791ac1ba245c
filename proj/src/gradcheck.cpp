// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/gradcheck.hpp"

#include <cmath>

namespace dutrack {

GradCheckResult finite_diff_check(const std::function<double()>& loss,
                                  std::span<const ParamSlot> params, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  auto eval = [&]() {
    const double v = loss();
    if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite loss");
    return v;
  };
  eval();

  GradCheckResult result;
  for (const ParamSlot& slot : params) {
    if (slot.value->size() != slot.analytic->size()) {
      throw ShapeError("finite_diff_check: gradient shape mismatch for " + slot.name);
    }
    for (std::size_t i = 0; i < slot.value->size(); ++i) {
      double& w = (*slot.value)[i];
      const double saved = w;
      w = saved + step;
      const double up = eval();
      w = saved - step;
      const double down = eval();
      w = saved;
      const double fd = (up - down) / (2.0 * step);
      const double err = std::abs((*slot.analytic)[i] - fd) / (std::abs(fd) + 1e-12);
      if (err > result.max_relative_error || result.checked == 0) {
        result.max_relative_error = err;
        result.worst_parameter = slot.name;
        result.worst_index = i;
      }
      ++result.checked;
    }
  }
  return result;
}

}  // namespace dutrack

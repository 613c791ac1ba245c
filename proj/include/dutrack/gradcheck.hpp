// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <string>

#include "dutrack/tensor.hpp"

namespace dutrack {

/// A trainable array together with the analytic gradient to verify.
struct ParamSlot {
  std::string name;
  Matrix* value = nullptr;
  const Matrix* analytic = nullptr;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares analytic gradients with central differences of `loss`, entry by
/// entry: |analytic − fd| / (|fd| + 1e-12). Parameters are restored afterwards.
/// Throws NumericError if the loss is non-finite at any probe.
GradCheckResult finite_diff_check(const std::function<double()>& loss,
                                  std::span<const ParamSlot> params, double step);

}  // namespace dutrack

// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   grad_check.hpp
 * @brief  Central finite-difference gradient checker.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

#include "tsan_lab/numerics/autograd.hpp"

namespace tsan_lab {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;

  [[nodiscard]] bool passed(double tol = 1e-4) const { return max_rel_error <= tol; }
};

/**
 * Compares backward() against central differences for every coordinate of
 * every parameter. The error of one coordinate is
 * |analytic - numeric| / max(1, |numeric|).
 *
 * `loss` must be deterministic: it rebuilds the graph from the current
 * parameter values on every call.
 */
inline GradCheckResult grad_check(const std::function<Var()>& loss, std::span<Parameter* const> params,
                                  double h = 1e-5) {
  for (Parameter* p : params) p->zero_grad();
  backward(loss());

  GradCheckResult result;
  for (Parameter* p : params) {
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = loss().item();
      p->value[i] = saved - h;
      const double down = loss().item();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
      result.max_rel_error = std::max(result.max_rel_error, err);
      ++result.coordinates;
    }
    p->zero_grad();
  }
  return result;
}

}  // namespace tsan_lab

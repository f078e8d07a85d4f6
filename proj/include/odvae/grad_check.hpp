#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "odvae/tensor.hpp"

namespace odvae {

struct GradCheckReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  bool passed = false;
};

// Compares the tape gradient of a scalar function with central differences
// (f(x + h e_i) - f(x - h e_i)) / 2h at every coordinate of x0. The relative
// error uses max(|analytic|, |numeric|, 1e-8) as denominator.
//
// f receives x as a tape leaf for the analytic pass and as a plain tensor for
// the probes, so it must not assume either. Throws DomainError naming the
// coordinate if a probe evaluates to NaN.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0, double h,
                           double tol);

}  // namespace odvae

#include "odvae/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace odvae {

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0, double h,
                           double tol) {
  if (!(h > 0)) throw std::invalid_argument("grad_check: step must be positive");
  GradCheckReport report;

  Tape tape;
  const Tensor x = tape.leaf(x0);
  const Tensor y = f(x);
  if (!y.on_tape()) {
    // f ignores its argument entirely.
    report.analytic.assign(x0.size(), 0.0);
  } else {
    const Tensor g = tape.backward(y).of(x);
    report.analytic.assign(g.data().begin(), g.data().end());
  }

  const Tensor base = x0.detach();
  report.numeric.resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    Tensor plus = base;
    Tensor minus = base;
    plus.mutable_data()[i] += h;
    minus.mutable_data()[i] -= h;
    double fp = 0.0, fm = 0.0;
    try {
      fp = f(plus).item();
      fm = f(minus).item();
    } catch (const DomainError& e) {
      throw DomainError("grad_check: probing coordinate " + std::to_string(i) + ": " + e.what());
    }
    if (std::isnan(fp) || std::isnan(fm)) {
      throw DomainError("grad_check: function is NaN when probing coordinate " + std::to_string(i));
    }
    report.numeric[i] = (fp - fm) / (2.0 * h);
  }

  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double a = report.analytic[i], n = report.numeric[i];
    const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
    const double err = std::abs(a - n) / denom;
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_coordinate = i;
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace odvae

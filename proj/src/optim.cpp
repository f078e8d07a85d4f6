#include "odvae/optim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace odvae::optim {

Schedule Schedule::constant(double v) {
  Schedule s;
  s.start = s.end = v;
  return s;
}

Schedule Schedule::linear(double start, double end, std::uint64_t steps) {
  Schedule s;
  s.kind = Kind::Linear;
  s.start = start;
  s.end = end;
  s.steps = steps;
  return s;
}

Schedule Schedule::step_decay(double initial, double factor, std::vector<std::uint64_t> milestones) {
  Schedule s;
  s.kind = Kind::StepDecay;
  s.start = initial;
  s.factor = factor;
  std::sort(milestones.begin(), milestones.end());
  s.milestones = std::move(milestones);
  return s;
}

double Schedule::eval(std::uint64_t step) const {
  switch (kind) {
    case Kind::Constant:
      return start;
    case Kind::Linear:
      if (step >= steps) return end;
      return start + (end - start) * (static_cast<double>(step) / static_cast<double>(steps));
    case Kind::StepDecay: {
      double v = start;
      for (auto m : milestones)
        if (step >= m) v *= factor;
      return v;
    }
  }
  return start;
}

Schedule Schedule::scaled(double scale) const {
  if (!(scale > 0)) throw std::invalid_argument("schedule: scale must be positive");
  Schedule s = *this;
  auto sc = [&](std::uint64_t n) { return static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * scale)); };
  s.steps = sc(steps);
  for (auto& m : s.milestones) m = sc(m);
  return s;
}

Schedule Schedule::parse(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  auto fail = [&]() -> Schedule {
    throw std::invalid_argument("schedule: cannot parse '" + text +
                                "' (expected 'constant V', 'linear A B STEPS' or 'step A FACTOR M1,M2,...')");
  };
  auto done = [&] {
    std::string rest;
    return !(in >> rest);
  };
  if (kind == "constant") {
    double v;
    if (!(in >> v) || !done()) return fail();
    return constant(v);
  }
  if (kind == "linear") {
    double a, b;
    long long n;
    if (!(in >> a >> b >> n) || n <= 0 || !done()) return fail();
    return linear(a, b, static_cast<std::uint64_t>(n));
  }
  if (kind == "step") {
    double a, f;
    std::string list;
    if (!(in >> a >> f)) return fail();
    in >> list;
    if (!done()) return fail();
    std::vector<std::uint64_t> ms;
    std::istringstream items(list);
    std::string item;
    while (std::getline(items, item, ',')) {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(item, &used);
        if (used != item.size()) return fail();
        ms.push_back(v);
      } catch (const std::logic_error&) {
        return fail();
      }
    }
    return step_decay(a, f, std::move(ms));
  }
  return fail();
}

std::string Schedule::to_string() const {
  std::ostringstream out;
  out.precision(17);
  switch (kind) {
    case Kind::Constant:
      out << "constant " << start;
      break;
    case Kind::Linear:
      out << "linear " << start << ' ' << end << ' ' << steps;
      break;
    case Kind::StepDecay:
      out << "step " << start << ' ' << factor << ' ';
      for (std::size_t i = 0; i < milestones.size(); ++i) out << (i ? "," : "") << milestones[i];
      break;
  }
  return out.str();
}

Method parse_method(const std::string& s) {
  if (s == "adam") return Method::Adam;
  if (s == "adamax") return Method::AdaMax;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected adam or adamax)");
}

std::string to_string(Method m) { return m == Method::Adam ? "adam" : "adamax"; }

Optimizer::Optimizer(OptimizerConfig config, std::vector<std::string> names, const std::vector<Tensor>& params)
    : config_(config), names_(std::move(names)) {
  if (names_.size() != params.size()) throw std::invalid_argument("optimizer: one name per parameter is required");
  if (!(config_.beta1 >= 0 && config_.beta1 < 1) || !(config_.beta2 >= 0 && config_.beta2 < 1) || !(config_.eps > 0)) {
    throw std::invalid_argument("optimizer: need 0 <= beta1, beta2 < 1 and eps > 0");
  }
  for (const auto& p : params) {
    m_.push_back(Tensor::zeros(p.shape()));
    v_.push_back(Tensor::zeros(p.shape()));
  }
}

void Optimizer::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("optimizer: parameter count changed");
  double norm2 = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != params[i].shape() || params[i].shape() != m_[i].shape()) {
      throw ShapeError("optimizer: " + names_[i], grads[i].shape(), m_[i].shape());
    }
    for (double g : grads[i].data()) {
      if (std::isnan(g)) throw NumericError("optimizer: NaN gradient in parameter '" + names_[i] + "'");
      norm2 += g * g;
    }
  }
  double clip = 1.0;
  if (config_.max_norm > 0 && norm2 > config_.max_norm * config_.max_norm) clip = config_.max_norm / std::sqrt(norm2);

  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2, eps = config_.eps;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto m = m_[i].mutable_data();
    auto v = v_[i].mutable_data();
    const auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k] * clip;
      m[k] = b1 * m[k] + (1.0 - b1) * gk;
      if (config_.method == Method::Adam) {
        v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
        p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
      } else {
        v[k] = std::max(b2 * v[k], std::abs(gk));
        p[k] -= lr * (m[k] / c1) / (v[k] + eps);
      }
    }
  }
}

void Optimizer::restore(std::uint64_t steps, std::vector<Tensor> first, std::vector<Tensor> second) {
  if (first.size() != m_.size() || second.size() != v_.size()) throw ShapeError("optimizer: state has the wrong parameter count");
  for (std::size_t i = 0; i < m_.size(); ++i) {
    if (first[i].shape() != m_[i].shape() || second[i].shape() != v_[i].shape()) {
      throw ShapeError("optimizer state " + names_[i], first[i].shape(), m_[i].shape());
    }
  }
  t_ = steps;
  m_ = std::move(first);
  v_ = std::move(second);
}

}  // namespace odvae::optim

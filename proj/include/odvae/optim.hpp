// First-order optimizers (Adam, AdaMax) and step-indexed schedules for the
// learning rate, smoothing sharpness and KL weight.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "odvae/tensor.hpp"

namespace odvae::optim {

struct Schedule {
  enum class Kind { Constant, Linear, StepDecay };
  Kind kind = Kind::Constant;
  double start = 0.0;  // constant value, linear start, or step-decay initial value
  double end = 0.0;    // linear end
  std::uint64_t steps = 0;  // linear ramp length
  double factor = 1.0;      // step-decay multiplier
  std::vector<std::uint64_t> milestones;

  static Schedule constant(double v);
  static Schedule linear(double start, double end, std::uint64_t steps);
  static Schedule step_decay(double initial, double factor, std::vector<std::uint64_t> milestones);

  // Pure function of the step. Linear clamps at `end` once step >= steps.
  double eval(std::uint64_t step) const;
  // Multiplies every step count (ramp length, milestones) by `scale`.
  Schedule scaled(double scale) const;

  // Text form used by configs: "constant V", "linear A B STEPS",
  // "step A FACTOR M1,M2,...". Throws std::invalid_argument.
  static Schedule parse(const std::string& text);
  std::string to_string() const;
};

enum class Method { Adam, AdaMax };
Method parse_method(const std::string& s);
std::string to_string(Method m);

struct OptimizerConfig {
  Method method = Method::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-3;
  double max_norm = 0.0;  // global gradient-norm clip, 0 disables
};

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerConfig config, std::vector<std::string> names, const std::vector<Tensor>& params);

  // One update in place. Throws NumericError naming the first parameter whose
  // gradient holds a NaN; parameters are left untouched in that case.
  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr);

  const OptimizerConfig& config() const { return config_; }
  std::uint64_t steps() const { return t_; }
  const std::vector<std::string>& names() const { return names_; }

  // Moments as tensors shaped like the parameters, for checkpointing.
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void restore(std::uint64_t steps, std::vector<Tensor> first, std::vector<Tensor> second);

 private:
  OptimizerConfig config_;
  std::vector<std::string> names_;
  std::vector<Tensor> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace odvae::optim

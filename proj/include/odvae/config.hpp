// Run configuration: a sectioned key = value text file.
//
//   [model]     arch, groups, prior, hidden, hidden_layers, output_bias
//   [smoothing] kind, beta, lambda, mu0, mu1, s, bound, cross_term
//   [optim]     method, lr, beta1, beta2, eps, max_norm, scale
//   [kl]        gamma, balance, epsilon
//   [pcd]       chains, sweeps
//   [data]      source, dir, binarization, obin_train, obin_test, valid,
//               bars_size, bars_noise, bars_train, bars_test
//   [train]     batch, iterations, seed, log_every, checkpoint_every
//   [eval]      k, batch, pt_sweeps, pt_temperatures, pt_replicas,
//               sample_burn_in
//
// Schedules (beta, lr, gamma) use "constant V", "linear A B STEPS" or
// "step A FACTOR M1,M2,...". `scale` multiplies every schedule step count.
// Lines starting with ';' or '#' are comments. Unknown keys are errors.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "odvae/bounds.hpp"
#include "odvae/data.hpp"
#include "odvae/models.hpp"
#include "odvae/optim.hpp"

namespace odvae {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct RunConfig {
  // [model]
  models::Arch arch = models::Arch::Nonlinear;
  std::vector<std::size_t> groups{200};
  models::PriorKind prior = models::PriorKind::Factorial;
  std::size_t hidden = 200;
  std::size_t hidden_layers = 2;
  bool output_bias = true;  // initialize the decoder bias from training pixel means

  // [smoothing]
  std::string smoothing = "exp";  // exp | logistic | spike | concrete
  optim::Schedule beta = optim::Schedule::constant(8.0);
  double lambda = 0.5;
  double mu0 = 0.0, mu1 = 1.0, s = 0.1;
  std::string bound = "joint";  // joint | marginal
  bounds::CrossTerm cross_term = bounds::CrossTerm::Nu;

  // [optim]
  optim::OptimizerConfig optimizer;
  optim::Schedule lr = optim::Schedule::constant(1e-3);
  double scale = 1.0;

  // [kl]
  optim::Schedule gamma = optim::Schedule::constant(1.0);
  bool kl_balance = true;
  double kl_epsilon = 0.1;

  // [pcd]
  std::size_t pcd_chains = 100;
  std::size_t pcd_sweeps = 40;

  // [data]
  std::string source = "bars";  // bars | mnist
  std::string data_dir;
  data::Binarization binarization = data::Binarization::Threshold;
  std::string obin_train, obin_test;
  std::size_t valid = 0;
  std::size_t bars_size = 8;
  double bars_noise = 0.05;
  std::size_t bars_train = 2000, bars_test = 500;

  // [train]
  std::size_t batch = 100;
  std::size_t iterations = 1000;
  std::uint64_t seed = 1;
  std::size_t log_every = 100;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only

  // [eval]
  std::size_t eval_k = 100;
  std::size_t eval_batch = 100;
  std::size_t pt_sweeps = 20000;
  std::size_t pt_temperatures = 20;
  std::size_t pt_replicas = 4;
  std::size_t sample_burn_in = 1000;

  // Canonical text listing every key; parse(to_text()) reproduces the config.
  std::string to_text() const;
  // FNV-1a of to_text(), 16 hex digits.
  std::string hash() const;

  // Smoothing at a training step (beta follows its schedule).
  smoothing::SmoothingKind smoothing_at(std::uint64_t step) const;
  models::ModelSpec model_spec(std::size_t pixels) const;
  optim::Schedule scaled(const optim::Schedule& s) const { return s.scaled(scale); }
};

// Collects every problem before throwing ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace odvae

// Training loop, checkpoint conversion and binary-limit evaluation.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "odvae/checkpoint.hpp"
#include "odvae/config.hpp"
#include "odvae/data.hpp"
#include "odvae/models.hpp"
#include "odvae/optim.hpp"
#include "odvae/rbm.hpp"

namespace odvae {

// Train / validation / test data as described by the config. Relative paths
// are resolved against the working directory.
data::Splits load_data(const RunConfig& cfg);

struct StepMetrics {
  std::uint64_t step = 0;
  double loss = 0;
  double elbo = 0;  // batch mean; includes -log Z for RBM priors only when log_z is set
  double reconstruction = 0;
  std::vector<double> kl;
  std::vector<double> alpha;
  double beta = 0, gamma = 0, lr = 0;
  std::optional<double> log_z;
};

class Trainer {
 public:
  // `workers` threads advance the PCD chains; results do not depend on it.
  Trainer(RunConfig cfg, data::Splits data, std::size_t workers = 1);
  // Continues from a checkpoint written by checkpoint(); the config is taken
  // from the checkpoint.
  Trainer(const Checkpoint& ckpt, data::Splits data, std::size_t workers = 1);

  // One optimizer update. Throws NumericError on a non-finite loss, before
  // any parameter changes.
  StepMetrics step();

  std::uint64_t steps_done() const { return step_; }
  const RunConfig& config() const { return cfg_; }
  const models::Model& model() const { return model_; }
  const data::Splits& data() const { return data_; }
  Checkpoint checkpoint() const;

 private:
  void init();
  std::vector<std::size_t> batch_indices(std::uint64_t step);

  RunConfig cfg_;
  data::Splits data_;
  models::Model model_;
  optim::Optimizer opt_;
  rbm::GibbsChains chains_;
  std::size_t workers_ = 1;
  std::uint64_t step_ = 0;
  std::uint64_t perm_epoch_ = ~std::uint64_t{0};
  std::vector<std::size_t> perm_;
};

// Rebuilds the model stored in a checkpoint.
models::Model model_from_checkpoint(const Checkpoint& ckpt, RunConfig* cfg_out = nullptr);

struct LogZEstimate {
  double value = 0, se = 0;
  std::string method;             // "none", "exact" or "pt"
  std::optional<double> exact;    // when the RBM is small enough to enumerate
  std::vector<double> swap_rates;
};

// log Z for RBM priors: parallel tempering with the config's budget, plus the
// exact value when n1 + n2 <= 24. The PT estimate is used unless pt is false.
LogZEstimate estimate_log_z(const models::Model& m, const RunConfig& cfg, bool pt = true, std::size_t workers = 1);

struct EvalResult {
  std::size_t k = 0, n = 0;
  double mean = 0, se = 0, sd = 0;
  std::vector<double> per_datum;
};

// k-sample importance-weighted log-likelihood of every row of `d`, processed
// in chunks of `batch`; chunk c draws from seed (seed, c).
EvalResult evaluate(const models::Model& m, const data::Dataset& d, std::size_t k, std::uint64_t seed,
                    std::size_t batch, double log_z);

}  // namespace odvae

// Variational bounds for models with smoothed binary latents.
//
// All per-datum quantities are B x 1 tensors so callers can average, weight
// or inspect them. Latent groups are ordered: group i's posterior and prior
// logits may depend on the relaxed samples of groups before it.
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "odvae/rbm.hpp"
#include "odvae/smoothing.hpp"
#include "odvae/tensor.hpp"

namespace odvae::bounds {

// Per-row sum_i KL(Bern(sigmoid(q_i)) || Bern(sigmoid(p_i))) from logits.
// p_logits may be a row vector shared by every row of q_logits.
Tensor bernoulli_kl(const Tensor& q_logits, const Tensor& p_logits);

// Per-row entropy of a factorial Bernoulli given its logits.
Tensor bernoulli_entropy(const Tensor& logits);

// Per-row log p(x | logits) for binary x.
Tensor bernoulli_log_likelihood(const Tensor& x, const Tensor& logits);

struct GroupSample {
  Tensor logits;  // q(z_i | x, zeta_<i), B x n_i
  Tensor zeta;    // reparameterized sample, B x n_i
};

// Everything a bound needs from one forward pass.
struct ForwardPass {
  Tensor x;                           // B x D
  std::vector<GroupSample> groups;    // inference side
  std::vector<Tensor> prior_logits;   // p(z_i | zeta_<i); factorial and directed priors
  Tensor pixel_logits;                // p(x | zeta), B x D
  smoothing::SmoothingKind kind;
};

struct ElboBreakdown {
  Tensor reconstruction;          // B x 1
  std::vector<Tensor> kl_terms;   // per group, B x 1
  double log_z = 0;               // RBM priors only
  Tensor total;                   // B x 1

  double mean_total() const;
  double mean_reconstruction() const;
  std::vector<double> mean_kl() const;
};

// Reconstruction minus closed-form Bernoulli KLs.
ElboBreakdown joint_elbo(const ForwardPass& f);

// Reconstruction minus Monte Carlo KLs log q(zeta) - log p(zeta), evaluated
// at the same samples. Overlapping kinds only.
ElboBreakdown marginal_elbo(const ForwardPass& f);

enum class CrossTerm { Nu, Mu };

// KL(q(z, zeta | x) || p(z, zeta)) for a two-layer RBM prior, per row:
//   log Z - H(q1) - H(q2) - a1'mu1 - a2'mu2 - nu1' W mu2
// with nu1 = posterior_nu(g1, zeta1). CrossTerm::Mu replaces nu1 by mu1.
// log_z is a scalar; pass exact_log_z_tensor for an exact gradient or a
// constant when the PCD surrogate supplies it.
Tensor rbm_kl(const Tensor& q1_logits, const Tensor& zeta1, const Tensor& q2_logits, const rbm::RbmParams& prior,
              const smoothing::SmoothingKind& kind, const Tensor& log_z, CrossTerm cross = CrossTerm::Nu);

// Reconstruction minus rbm_kl for a forward pass whose two groups are the
// RBM's layers. The KL is reported as a single group.
ElboBreakdown rbm_elbo(const ForwardPass& f, const rbm::RbmParams& prior, const Tensor& log_z,
                       CrossTerm cross = CrossTerm::Nu);

// Importance-weighted estimate log((1/k) sum_j w_j) per datum. log_weights(j)
// returns the batch's log-weights for draw j.
using LogWeightFn = std::function<std::vector<double>(std::size_t draw)>;
std::vector<double> iw_log_likelihood(const LogWeightFn& log_weights, std::size_t batch, std::size_t k);

// Weights per-group KLs so that groups are used evenly while gamma < 1.
struct KlBalancer {
  double epsilon = 0.1;
  double gamma = 1.0;
  bool enabled = true;

  struct Result {
    Tensor weighted;             // gamma * sum_i alpha_i KL_i
    std::vector<double> alpha;   // sums to the group count
  };
  // kl_means are scalar tensors, typically on the tape. alpha is computed from
  // their values and enters the result as constants.
  Result balance(const std::vector<Tensor>& kl_means) const;
};

}  // namespace odvae::bounds

// Smoothing transformations r(zeta | z) for binary latent variables and the
// mixtures q(zeta | x) = sum_z q(z | x) r(zeta | z) they induce.
//
// Overlapping transformations (ExpMixture, LogisticMixture) give both
// conditionals the same support, so the posterior q(z | x, zeta) is a proper
// Bernoulli and every term of the Boltzmann-prior KL is differentiable.
// SpikeExp and BinaryConcrete are the comparison baselines.

#pragma once

#include <string>
#include <variant>

#include "odvae/tensor.hpp"

namespace odvae::smoothing {

// Bernoulli means are clamped to [kQMin, 1 - kQMin] before inversion.
inline constexpr double kQMin = 1e-7;
inline constexpr double kDefaultBeta = 8.0;

struct ExpMixture {
  double beta = kDefaultBeta;
};
struct LogisticMixture {
  double mu0 = 0.0;
  double mu1 = 1.0;
  double s = 0.1;
};
struct SpikeExp {
  double beta = kDefaultBeta;
};
struct BinaryConcrete {
  double lambda = 0.5;
};

using SmoothingKind = std::variant<ExpMixture, LogisticMixture, SpikeExp, BinaryConcrete>;

// Throws std::invalid_argument when parameters are out of range.
void validate(const SmoothingKind& kind);
std::string describe(const SmoothingKind& kind);
// "exp", "logistic", "spike", "concrete"
std::string kind_name(const SmoothingKind& kind);
bool is_overlapping(const SmoothingKind& kind);

// --- exponential mixture -------------------------------------------------

double exp_mixture_cdf(double q, double zeta, double beta);

// zeta = F^{-1}(rho) for the mixture with Bernoulli mean q. Differentiable
// in q (and rho) on the tape; q is clamped to [kQMin, 1 - kQMin].
Tensor exp_mixture_inverse_cdf(const Tensor& q, const Tensor& rho, double beta);
double exp_mixture_inverse_cdf(double q, double rho, double beta);

Tensor exp_mixture_log_pdf(const Tensor& q, const Tensor& zeta, double beta);
double exp_mixture_log_pdf(double q, double zeta, double beta);

// --- logistic mixture ----------------------------------------------------

double logistic_mixture_cdf(double q, double zeta, const LogisticMixture& p);
Tensor logistic_mixture_inverse_cdf(const Tensor& q, const Tensor& rho, const LogisticMixture& p);
double logistic_mixture_inverse_cdf(double q, double rho, const LogisticMixture& p);
Tensor logistic_mixture_log_pdf(const Tensor& q, const Tensor& zeta, const LogisticMixture& p);

// --- baselines -----------------------------------------------------------

double spike_exp_inverse_cdf(double q, double rho, double beta);

Tensor binary_concrete_sample(const Tensor& logits, const Tensor& rho, double lambda);
double binary_concrete_sample(double logit, double rho, double lambda);

// --- posterior quantities --------------------------------------------------

// log r(zeta | z = 1) - log r(zeta | z = 0). Overlapping kinds only.
Tensor log_density_ratio(const Tensor& zeta, const SmoothingKind& kind);

// nu = q(z = 1 | x, zeta) = sigmoid(g + log_density_ratio(zeta)).
Tensor posterior_nu(const Tensor& logits, const Tensor& zeta, const SmoothingKind& kind);

// --- kind-generic entry points -------------------------------------------

// Reparameterized draw zeta ~ q(zeta | x) given Bernoulli logits and uniform
// noise of the same shape.
Tensor sample(const SmoothingKind& kind, const Tensor& logits, const Tensor& rho);

// log q(zeta | x) of the mixture. Overlapping kinds only.
Tensor mixture_log_pdf(const SmoothingKind& kind, const Tensor& logits, const Tensor& zeta);

// Draw from a single conditional r(zeta | z) for a fixed binary z.
double sample_conditional(const SmoothingKind& kind, int z, double rho);

// Inverse CDF as a function of the Bernoulli mean q. Used for curve output.
double inverse_cdf(const SmoothingKind& kind, double q, double rho);

}  // namespace odvae::smoothing

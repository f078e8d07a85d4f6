// Encoder/decoder networks and model assembly for factorial, directed and
// RBM priors over groups of smoothed binary latents.
//
// Parameters live in a flat list of named tensors. Every forward function
// takes that list explicitly, either as raw values (evaluation) or as leaves
// on a tape (training), so the same code serves both.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "odvae/bounds.hpp"
#include "odvae/rbm.hpp"
#include "odvae/rng.hpp"
#include "odvae/smoothing.hpp"
#include "odvae/tensor.hpp"

namespace odvae::models {

enum class Arch { Linear, Nonlinear };
enum class PriorKind { Factorial, Directed, Rbm };

std::string to_string(Arch a);
std::string to_string(PriorKind p);
Arch parse_arch(const std::string& s);
PriorKind parse_prior(const std::string& s);

struct ModelSpec {
  Arch arch = Arch::Nonlinear;
  std::vector<std::size_t> groups{200};
  PriorKind prior = PriorKind::Factorial;
  smoothing::SmoothingKind smoothing = smoothing::ExpMixture{};
  std::size_t pixels = 784;
  std::size_t hidden = 200;
  std::size_t hidden_layers = 2;

  std::size_t latent_total() const;
  // Throws std::invalid_argument listing the first inconsistency.
  void validate() const;
};

using Params = std::vector<Tensor>;

struct Dense {
  std::size_t w = 0;  // index of the fan_in x fan_out weight
  std::size_t b = 0;  // index of the bias
};

// Affine layers with tanh between them and no activation on the output.
struct Mlp {
  std::vector<Dense> layers;
  Tensor operator()(const Params& p, const Tensor& x) const;
};

class Model {
 public:
  Model() = default;
  // Weights uniform in +-1/sqrt(fan_in), biases zero. When pixel_means is
  // given the decoder's output bias starts at their logits.
  Model(ModelSpec spec, std::uint64_t seed, const std::vector<double>* pixel_means = nullptr);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<std::string>& names() const { return names_; }
  Params& values() { return values_; }
  const Params& values() const { return values_; }
  std::size_t index(const std::string& name) const;
  std::size_t parameter_count() const;

  // Registers every parameter as a leaf of the tape.
  Params attach(Tape& tape) const;

  // Group i's encoder maps [x, zeta_1, ..., zeta_{i-1}] to logits.
  const Mlp& encoder(std::size_t group) const { return encoders_[group]; }
  const Mlp& decoder() const { return decoder_; }
  // Directed prior: group i > 0 maps [zeta_1, ..., zeta_{i-1}] to logits.
  const Mlp& prior_net(std::size_t group) const { return prior_nets_[group]; }
  // Factorial prior logits for a group, and directed prior logits for group 0.
  std::size_t prior_logits_index(std::size_t group) const { return prior_logits_[group]; }
  rbm::RbmParams rbm_params(const Params& p) const;

 private:
  std::size_t add(const std::string& name, Tensor value);
  Mlp build_mlp(const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);

  ModelSpec spec_;
  std::vector<std::string> names_;
  Params values_;
  std::vector<Mlp> encoders_;
  Mlp decoder_;
  std::vector<Mlp> prior_nets_;
  std::vector<std::size_t> prior_logits_;
  std::size_t rbm_a1_ = 0, rbm_a2_ = 0, rbm_w_ = 0;
};

// One uniform (0, 1) noise tensor per group, B x n_i, from the generator.
std::vector<Tensor> draw_noise(const ModelSpec& spec, std::size_t batch, Rng& rng);

// Sequential inference: g1 = enc1(x), zeta1 = sample(g1, noise1),
// g2 = enc2(x, zeta1), ...
std::vector<bounds::GroupSample> encode(const Model& m, const Params& p, const Tensor& x,
                                        const std::vector<Tensor>& noise, const smoothing::SmoothingKind& kind);

Tensor decode(const Model& m, const Params& p, const std::vector<Tensor>& zetas);

// Everything the bounds need: posterior groups, prior logits (factorial and
// directed priors) and pixel logits.
bounds::ForwardPass forward(const Model& m, const Params& p, const Tensor& x, const std::vector<Tensor>& noise,
                            const smoothing::SmoothingKind& kind);

// Binary-limit log-weights log p(z) + log p(x | z) - log q(z | x) for one
// draw of z per datum. log_z is used by RBM priors only.
std::vector<double> discrete_log_weights(const Model& m, const Tensor& x, Rng& rng, double log_z = 0.0);

// k-sample importance-weighted log-likelihood per datum in the binary limit.
// Draw j uses a generator seeded from (seed, j).
std::vector<double> iw_log_likelihood(const Model& m, const Tensor& x, std::size_t k, std::uint64_t seed,
                                      double log_z = 0.0);

struct PriorSamples {
  Tensor z;       // count x latent_total, binary
  Tensor zeta;    // count x latent_total
  Tensor pixels;  // count x pixels, Bernoulli means
};

// count = rows * per_z draws. Each block of per_z consecutive rows shares z
// and re-draws zeta. RBM priors use `burn_in` block Gibbs sweeps per chain.
PriorSamples sample_prior(const Model& m, std::size_t rows, std::size_t per_z, std::size_t burn_in,
                          std::uint64_t seed);

}  // namespace odvae::models

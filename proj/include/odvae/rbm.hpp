// Restricted Boltzmann machine prior p(z1, z2) = exp(-E(z1, z2)) / Z with
// E = -a1'z1 - a2'z2 - z1'W z2.
//
// Small instances are handled exactly by enumeration. Larger ones use block
// Gibbs chains: persistent chains supply the d(log Z)/d(theta) term during
// training through pcd_surrogate_loss, and parallel tempering estimates
// log Z itself for evaluation.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "odvae/rng.hpp"
#include "odvae/tensor.hpp"

namespace odvae::rbm {

// Enumeration guard for exact_log_z / exact_moments.
inline constexpr std::size_t kMaxExactUnits = 24;

struct RbmParams {
  Tensor a1;  // {n1}
  Tensor a2;  // {n2}
  Tensor W;   // {n1, n2}

  std::size_t n1() const { return a1.size(); }
  std::size_t n2() const { return a2.size(); }

  static RbmParams zeros(std::size_t n1, std::size_t n2);
  // Throws ShapeError or DomainError.
  void validate() const;
  RbmParams detach() const;
};

// Batched energy: z1 is L x n1, z2 is L x n2, result L x 1. On the tape when
// params are.
Tensor energy(const RbmParams& p, const Tensor& z1, const Tensor& z2);
double energy(const RbmParams& p, std::span<const double> z1, std::span<const double> z2);

// p(z1_i = 1 | z2) and p(z2_j = 1 | z1).
std::vector<double> conditional_z1(const RbmParams& p, std::span<const double> z2);
std::vector<double> conditional_z2(const RbmParams& p, std::span<const double> z1);

double exact_log_z(const RbmParams& p);

struct Moments {
  std::vector<double> z1;   // E[z1]
  std::vector<double> z2;   // E[z2]
  std::vector<double> z12;  // E[z1 z2'], row-major n1 x n2
};
Moments exact_moments(const RbmParams& p);

// Exact log Z recorded on the tape, with the exact moments as its gradient.
// For grad checks and small-model references; training uses the PCD surrogate.
Tensor exact_log_z_tensor(const RbmParams& p);

struct GibbsChains {
  std::size_t count = 0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::uint64_t seed = 0;
  std::vector<double> z1;  // count x n1, entries in {0, 1}
  std::vector<double> z2;  // count x n2
  std::vector<Rng> rngs;   // one per chain

  GibbsChains() = default;
  // Uniformly random initial states.
  GibbsChains(std::size_t count, std::size_t n1, std::size_t n2, std::uint64_t seed);

  // Restarts every chain's generator from (seed, epoch, chain).
  void reseed(std::uint64_t epoch);

  Tensor z1_tensor() const;
  Tensor z2_tensor() const;
};

// One block update of every chain: z1 ~ p(z1 | z2), then z2 ~ p(z2 | z1),
// with the energy scaled by inverse_temperature.
void gibbs_sweep(const RbmParams& p, GibbsChains& chains, double inverse_temperature = 1.0,
                 std::size_t workers = 1);

// Advances the chains by `sweeps` updates and returns -(1/L) sum_l E(z_l) with
// the samples held constant. Its tape gradient estimates d(log Z)/d(theta).
Tensor pcd_surrogate_loss(const RbmParams& p, GibbsChains& chains, std::size_t sweeps = 40,
                          std::size_t workers = 1);

// --- parallel tempering ------------------------------------------------------

struct PtConfig {
  std::size_t temperatures = 20;
  // Smallest nonzero inverse temperature of the geometric ladder.
  double min_beta = 0.01;
  // Explicit ladder; overrides `temperatures` when non-empty.
  std::vector<double> ladder;
  std::size_t sweeps = 20000;
  std::size_t burn_in = 1000;
  std::size_t replicas = 4;
  std::size_t workers = 1;
  std::uint64_t seed = 1;
  bool adapt = false;
  double min_swap_rate = 0.2;
  std::size_t max_temperatures = 200;
  std::size_t bootstrap_samples = 200;
  std::size_t bootstrap_blocks = 50;
};

struct PtResult {
  double log_z = 0;
  double se = 0;
  std::vector<double> betas;
  std::vector<double> swap_rates;   // adjacent pairs
  std::vector<double> mean_energy;  // per temperature
  std::size_t sweeps = 0;
  std::size_t replicas = 0;
};

// 0 followed by count - 1 geometric steps from min_beta to 1.
std::vector<double> geometric_ladder(std::size_t count, double min_beta);
void validate_ladder(const std::vector<double>& betas);

// Stepping-stone estimate of log Z from the exact base (n1 + n2) log 2 at
// inverse temperature 0, with a block-bootstrap standard error.
PtResult pt_log_z(const RbmParams& p, const PtConfig& config);

// CSV with columns beta,swap_rate,mean_energy. The swap rate on row k is for
// the pair (k, k + 1); the last row leaves it empty.
std::string pt_diagnostics_csv(const PtResult& r);

namespace detail {
// One tempered block update of a single chain on raw parameter buffers.
void sweep_chain(std::span<const double> a1, std::span<const double> a2, std::span<const double> W, double beta,
                 std::span<double> z1, std::span<double> z2, Rng& rng);
}  // namespace detail

}  // namespace odvae::rbm

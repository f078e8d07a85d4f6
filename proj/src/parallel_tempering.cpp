#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "odvae/parallel.hpp"
#include "odvae/rbm.hpp"

namespace odvae::rbm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Running log-sum-exp.
struct Lse {
  double max = kNegInf;
  double sum = 0;
  void add(double x) {
    if (x > max) {
      sum = sum * std::exp(max - x) + 1;
      max = x;
    } else {
      sum += std::exp(x - max);
    }
  }
  double value() const { return max == kNegInf ? kNegInf : max + std::log(sum); }
};

double log_sum_exp(const std::vector<double>& xs) {
  Lse l;
  for (double x : xs) l.add(x);
  return l.value();
}

struct ReplicaStats {
  // terms[k][b]: log-sum-exp over block b of -(beta_{k+1} - beta_k) E_k.
  std::vector<std::vector<double>> terms;
  std::vector<std::size_t> block_counts;
  std::vector<double> energy_sum;
  std::vector<std::size_t> attempts, accepts;
};

ReplicaStats run_replica(const RbmParams& p, const std::vector<double>& betas, std::size_t sweeps,
                         std::size_t burn_in, std::size_t blocks, std::uint64_t seed) {
  const std::size_t K = betas.size(), n1 = p.n1(), n2 = p.n2();
  Rng rng(seed);
  std::vector<std::vector<double>> z1(K, std::vector<double>(n1)), z2(K, std::vector<double>(n2));
  for (std::size_t k = 0; k < K; ++k) {
    for (auto& v : z1[k]) v = static_cast<double>(rng() & 1U);
    for (auto& v : z2[k]) v = static_cast<double>(rng() & 1U);
  }
  // slot[k] is the index of the state currently at temperature k.
  std::vector<std::size_t> slot(K);
  std::iota(slot.begin(), slot.end(), 0);
  std::vector<double> e(K);

  ReplicaStats st;
  blocks = std::max<std::size_t>(1, std::min(blocks, sweeps));
  std::vector<std::vector<Lse>> acc(K - 1, std::vector<Lse>(blocks));
  st.block_counts.assign(blocks, 0);
  st.energy_sum.assign(K, 0);
  st.attempts.assign(K - 1, 0);
  st.accepts.assign(K - 1, 0);

  const std::size_t per_block = (sweeps + blocks - 1) / blocks;
  for (std::size_t t = 0; t < burn_in + sweeps; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t s = slot[k];
      detail::sweep_chain(p.a1.data(), p.a2.data(), p.W.data(), betas[k], z1[s], z2[s], rng);
      e[k] = energy(p, z1[s], z2[s]);
    }
    for (std::size_t k = t % 2; k + 1 < K; k += 2) {
      const double log_accept = (betas[k + 1] - betas[k]) * (e[k + 1] - e[k]);
      const bool accept = log_accept >= 0 || std::log(uniform_open01(rng)) < log_accept;
      if (t >= burn_in) {
        ++st.attempts[k];
        st.accepts[k] += accept;
      }
      if (accept) {
        std::swap(slot[k], slot[k + 1]);
        std::swap(e[k], e[k + 1]);
      }
    }
    if (t < burn_in) continue;
    const std::size_t b = (t - burn_in) / per_block;
    ++st.block_counts[b];
    for (std::size_t k = 0; k < K; ++k) st.energy_sum[k] += e[k];
    for (std::size_t k = 0; k + 1 < K; ++k) acc[k][b].add(-(betas[k + 1] - betas[k]) * e[k]);
  }
  st.terms.assign(K - 1, std::vector<double>(blocks));
  for (std::size_t k = 0; k + 1 < K; ++k)
    for (std::size_t b = 0; b < blocks; ++b) st.terms[k][b] = acc[k][b].value();
  return st;
}

std::vector<double> swap_rates(const std::vector<ReplicaStats>& rs, std::size_t pairs) {
  std::vector<double> out(pairs);
  for (std::size_t k = 0; k < pairs; ++k) {
    std::size_t a = 0, c = 0;
    for (const auto& r : rs) {
      a += r.attempts[k];
      c += r.accepts[k];
    }
    out[k] = a ? static_cast<double>(c) / static_cast<double>(a) : 0.0;
  }
  return out;
}

std::vector<double> adapt_ladder(const RbmParams& p, std::vector<double> betas, const PtConfig& c) {
  const std::size_t pilot = std::max<std::size_t>(200, c.sweeps / 10);
  for (int round = 0; round < 16 && betas.size() < c.max_temperatures; ++round) {
    const auto st = run_replica(p, betas, pilot, pilot / 10, 1, derive_seed({c.seed, 0xada9, std::uint64_t(round)}));
    const auto rates = swap_rates({st}, betas.size() - 1);
    std::vector<double> next{betas[0]};
    bool inserted = false;
    for (std::size_t k = 0; k + 1 < betas.size(); ++k) {
      if (rates[k] < c.min_swap_rate && next.size() + (betas.size() - k) <= c.max_temperatures) {
        next.push_back(0.5 * (betas[k] + betas[k + 1]));
        inserted = true;
      }
      next.push_back(betas[k + 1]);
    }
    betas = std::move(next);
    if (!inserted) break;
  }
  return betas;
}

}  // namespace

std::vector<double> geometric_ladder(std::size_t count, double min_beta) {
  if (count < 2) throw std::invalid_argument("geometric_ladder: need at least 2 temperatures");
  if (!(min_beta > 0 && min_beta < 1)) throw std::invalid_argument("geometric_ladder: min_beta must be in (0, 1)");
  std::vector<double> b{0.0};
  if (count == 2) {
    b.push_back(1.0);
    return b;
  }
  const double steps = static_cast<double>(count - 2);
  for (std::size_t i = 0; i + 1 < count; ++i) b.push_back(min_beta * std::pow(1.0 / min_beta, static_cast<double>(i) / steps));
  b.back() = 1.0;
  return b;
}

void validate_ladder(const std::vector<double>& betas) {
  if (betas.size() < 2) throw std::invalid_argument("pt ladder: need at least 2 inverse temperatures");
  if (betas.front() != 0.0 || betas.back() != 1.0) throw std::invalid_argument("pt ladder: must start at 0 and end at 1");
  for (std::size_t k = 0; k + 1 < betas.size(); ++k)
    if (!(betas[k] < betas[k + 1])) throw std::invalid_argument("pt ladder: inverse temperatures must strictly increase");
}

PtResult pt_log_z(const RbmParams& params, const PtConfig& c) {
  const RbmParams p = params.detach();
  p.validate();
  if (c.sweeps == 0) throw std::invalid_argument("pt_log_z: sweeps must be at least 1");
  if (c.replicas == 0) throw std::invalid_argument("pt_log_z: replicas must be at least 1");
  std::vector<double> betas = c.ladder.empty() ? geometric_ladder(c.temperatures, c.min_beta) : c.ladder;
  validate_ladder(betas);
  if (c.adapt) betas = adapt_ladder(p, betas, c);

  const std::size_t K = betas.size();
  std::vector<ReplicaStats> rs(c.replicas);
  parallel_for(c.replicas, c.workers, [&](std::size_t r) {
    rs[r] = run_replica(p, betas, c.sweeps, c.burn_in, c.bootstrap_blocks, derive_seed({c.seed, 0x7e3, r}));
  });

  // Units for the bootstrap are (replica, block) pairs.
  struct Unit {
    std::size_t r, b;
  };
  std::vector<Unit> units;
  for (std::size_t r = 0; r < rs.size(); ++r)
    for (std::size_t b = 0; b < rs[r].block_counts.size(); ++b)
      if (rs[r].block_counts[b]) units.push_back({r, b});

  const double log_z0 = static_cast<double>(p.n1() + p.n2()) * std::log(2.0);
  auto estimate = [&](const std::vector<std::size_t>& pick) {
    double total = log_z0;
    std::size_t n = 0;
    for (std::size_t u : pick) n += rs[units[u].r].block_counts[units[u].b];
    std::vector<double> t(pick.size());
    for (std::size_t k = 0; k + 1 < K; ++k) {
      for (std::size_t i = 0; i < pick.size(); ++i) t[i] = rs[units[pick[i]].r].terms[k][units[pick[i]].b];
      total += log_sum_exp(t) - std::log(static_cast<double>(n));
    }
    return total;
  };

  PtResult out;
  std::vector<std::size_t> all(units.size());
  std::iota(all.begin(), all.end(), 0);
  out.log_z = estimate(all);

  Rng boot(derive_seed({c.seed, 0xb007}));
  std::vector<double> reps(c.bootstrap_samples);
  std::vector<std::size_t> pick(units.size());
  for (auto& v : reps) {
    for (auto& u : pick) u = static_cast<std::size_t>(uniform01(boot) * static_cast<double>(units.size()));
    v = estimate(pick);
  }
  if (reps.size() > 1) {
    const double m = std::accumulate(reps.begin(), reps.end(), 0.0) / static_cast<double>(reps.size());
    double var = 0;
    for (double v : reps) var += (v - m) * (v - m);
    out.se = std::sqrt(var / static_cast<double>(reps.size() - 1));
  }

  out.betas = betas;
  out.swap_rates = swap_rates(rs, K - 1);
  out.mean_energy.assign(K, 0);
  std::size_t recorded = 0;
  for (const auto& r : rs) {
    for (std::size_t k = 0; k < K; ++k) out.mean_energy[k] += r.energy_sum[k];
    recorded += std::accumulate(r.block_counts.begin(), r.block_counts.end(), std::size_t{0});
  }
  for (auto& m : out.mean_energy) m /= static_cast<double>(recorded);
  out.sweeps = c.sweeps;
  out.replicas = c.replicas;
  return out;
}

std::string pt_diagnostics_csv(const PtResult& r) {
  std::ostringstream os;
  os.precision(17);
  os << "beta,swap_rate,mean_energy\n";
  for (std::size_t k = 0; k < r.betas.size(); ++k) {
    os << r.betas[k] << ',';
    if (k < r.swap_rates.size()) os << r.swap_rates[k];
    os << ',' << r.mean_energy[k] << '\n';
  }
  return os.str();
}

}  // namespace odvae::rbm

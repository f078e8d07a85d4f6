// Small models whose bounds can be computed by quadrature or enumeration.
// The *_quad functions use only oracles.hpp; forward and rbm_kl_samples build
// the same models out of library operations.

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "odvae/bounds.hpp"
#include "odvae/rng.hpp"
#include "odvae/smoothing.hpp"
#include "oracles.hpp"

namespace toy {

// One or two single-bit groups with a directed prior and a linear decoder:
//   q(z1 = 1) = sigmoid(c1),           p(z1 = 1) = sigmoid(d1)
//   q(z2 = 1 | zeta1) = sigmoid(c2 + v2 zeta1), p(z2 = 1 | zeta1) = sigmoid(d2 + u2 zeta1)
//   pixel logits = b + w1 zeta1 + w2 zeta2
struct Chain {
  double beta = 8.0;
  std::vector<double> x;
  double c1 = 0, d1 = 0;
  bool two = false;
  double c2 = 0, v2 = 0, d2 = 0, u2 = 0;
  std::vector<double> b, w1, w2;
};

inline Chain random_chain(bool two, std::uint64_t seed, std::size_t pixels = 6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.5);
  Chain t;
  t.two = two;
  t.c1 = n(rng);
  t.d1 = n(rng);
  t.c2 = n(rng);
  t.v2 = n(rng);
  t.d2 = n(rng);
  t.u2 = n(rng);
  for (std::size_t i = 0; i < pixels; ++i) {
    t.x.push_back(static_cast<double>(rng() & 1));
    t.b.push_back(n(rng));
    t.w1.push_back(2 * n(rng));
    t.w2.push_back(two ? 2 * n(rng) : 0.0);
  }
  return t;
}

// --- oracle side -------------------------------------------------------------

inline double log_sig(double g) { return -std::log1p(std::exp(-g)); }

inline double log_lik(const Chain& t, double z1, double z2) {
  double s = 0;
  for (std::size_t i = 0; i < t.x.size(); ++i) {
    const double l = t.b[i] + t.w1[i] * z1 + t.w2[i] * z2;
    s += t.x[i] ? log_sig(l) : log_sig(-l);
  }
  return s;
}

inline double kl_bern(double gq, double gp) {
  const double q = oracle::sigmoid(gq), p = oracle::sigmoid(gp);
  return q * std::log(q / p) + (1 - q) * std::log((1 - q) / (1 - p));
}

// Simpson nodes and weights on [0, 1].
inline void simpson_rule(std::size_t n, std::vector<double>& x, std::vector<double>& w) {
  if (n % 2) ++n;
  x.resize(n + 1);
  w.resize(n + 1);
  const double h = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i <= n; ++i) {
    x[i] = h * static_cast<double>(i);
    w[i] = h / 3.0 * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
}

// Expected joint bound (closed-form KLs, zeta-expectations by quadrature).
inline double joint_quad(const Chain& t, std::size_t n) {
  std::vector<double> z, w;
  simpson_rule(n, z, w);
  const double q1 = oracle::sigmoid(t.c1);
  double total = -kl_bern(t.c1, t.d1);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d1 = w[i] * oracle::exp_mix_pdf(q1, z[i], t.beta);
    if (!t.two) {
      total += d1 * log_lik(t, z[i], 0.0);
      continue;
    }
    const double g2 = t.c2 + t.v2 * z[i];
    const double q2 = oracle::sigmoid(g2);
    double inner = -kl_bern(g2, t.d2 + t.u2 * z[i]);
    for (std::size_t j = 0; j < z.size(); ++j) inner += w[j] * oracle::exp_mix_pdf(q2, z[j], t.beta) * log_lik(t, z[i], z[j]);
    total += d1 * inner;
  }
  return total;
}

// Expected marginal bound, entirely by quadrature.
inline double marginal_quad(const Chain& t, std::size_t n) {
  std::vector<double> z, w;
  simpson_rule(n, z, w);
  const double q1 = oracle::sigmoid(t.c1), p1 = oracle::sigmoid(t.d1);
  double total = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double dq1 = oracle::exp_mix_pdf(q1, z[i], t.beta);
    const double k1 = std::log(oracle::exp_mix_pdf(p1, z[i], t.beta)) - std::log(dq1);
    if (!t.two) {
      total += w[i] * dq1 * (log_lik(t, z[i], 0.0) + k1);
      continue;
    }
    const double q2 = oracle::sigmoid(t.c2 + t.v2 * z[i]), p2 = oracle::sigmoid(t.d2 + t.u2 * z[i]);
    double inner = 0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double dq2 = oracle::exp_mix_pdf(q2, z[j], t.beta);
      const double k2 = std::log(oracle::exp_mix_pdf(p2, z[j], t.beta)) - std::log(dq2);
      inner += w[j] * dq2 * (log_lik(t, z[i], z[j]) + k2);
    }
    total += w[i] * dq1 * (inner + k1);
  }
  return total;
}

// --- library side ------------------------------------------------------------

inline odvae::Tensor uniform_noise(std::size_t rows, std::size_t cols, odvae::Rng& rng) {
  std::vector<double> v(rows * cols);
  for (auto& r : v) r = odvae::uniform_open01(rng);
  return odvae::Tensor({rows, cols}, v);
}

// B independent single-sample draws for the same x, one per row.
inline odvae::bounds::ForwardPass forward(const Chain& t, std::size_t B, std::uint64_t seed) {
  using odvae::Tensor;
  odvae::Rng rng(seed);
  const std::size_t D = t.x.size();
  odvae::bounds::ForwardPass f;
  f.kind = odvae::smoothing::ExpMixture{t.beta};
  std::vector<double> xs;
  for (std::size_t r = 0; r < B; ++r) xs.insert(xs.end(), t.x.begin(), t.x.end());
  f.x = Tensor({B, D}, xs);
  const Tensor g1 = Tensor::full({B, 1}, t.c1);
  const Tensor zeta1 = odvae::smoothing::sample(f.kind, g1, uniform_noise(B, 1, rng));
  f.groups.push_back({g1, zeta1});
  f.prior_logits.push_back(Tensor::vector({t.d1}));
  Tensor logits = odvae::affine(zeta1, Tensor::matrix(1, D, t.w1), Tensor::vector(t.b));
  if (t.two) {
    const Tensor g2 = zeta1 * t.v2 + t.c2;
    const Tensor zeta2 = odvae::smoothing::sample(f.kind, g2, uniform_noise(B, 1, rng));
    f.groups.push_back({g2, zeta2});
    f.prior_logits.push_back(zeta1 * t.u2 + t.d2);
    logits = logits + odvae::matmul(zeta2, Tensor::matrix(1, D, t.w2));
  }
  f.pixel_logits = logits;
  return f;
}

// --- RBM prior with two 2-unit layers ---------------------------------------
//   q(z1 = 1) = sigmoid(c1), q(z2 = 1 | zeta1) = sigmoid(c2 + V zeta1)
struct RbmToy {
  double beta = 8.0;
  std::vector<double> c1, c2, V;  // V is 2 x 2, row j feeds unit j of z2
  std::vector<double> a1, a2, W;  // W is 2 x 2 row-major
};

inline RbmToy random_rbm_toy(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  RbmToy t;
  for (int i = 0; i < 2; ++i) {
    t.c1.push_back(n(rng));
    t.c2.push_back(n(rng));
    t.a1.push_back(n(rng));
    t.a2.push_back(n(rng));
  }
  for (int i = 0; i < 4; ++i) {
    t.V.push_back(n(rng));
    t.W.push_back(n(rng));
  }
  return t;
}

inline double rbm_toy_energy(const RbmToy& t, const double* z1, const double* z2) {
  double e = -(t.a1[0] * z1[0] + t.a1[1] * z1[1] + t.a2[0] * z2[0] + t.a2[1] * z2[1]);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) e -= z1[i] * t.W[i * 2 + j] * z2[j];
  return e;
}

inline double rbm_toy_log_z(const RbmToy& t) {
  std::vector<double> le;
  for (int s = 0; s < 16; ++s) {
    const double z1[2] = {double(s & 1), double((s >> 1) & 1)}, z2[2] = {double((s >> 2) & 1), double((s >> 3) & 1)};
    le.push_back(-rbm_toy_energy(t, z1, z2));
  }
  return oracle::log_sum_exp(le);
}

// KL(q(z, zeta | x) || p(z, zeta)) by enumerating z and integrating zeta1 on
// an n x n Simpson grid. zeta2 drops out because r(zeta2 | z2) cancels.
inline double rbm_kl_quad(const RbmToy& t, std::size_t n) {
  std::vector<double> z, w;
  simpson_rule(n, z, w);
  const std::size_t m = z.size();
  const double log_z = rbm_toy_log_z(t);
  const double q1[2] = {oracle::sigmoid(t.c1[0]), oracle::sigmoid(t.c1[1])};
  // Per-dimension weight w_i r(zeta_i | z) for z in {0, 1}.
  std::vector<double> r0(m), r1(m);
  for (std::size_t i = 0; i < m; ++i) {
    r0[i] = w[i] * oracle::exp_r0(z[i], t.beta);
    r1[i] = w[i] * oracle::exp_r1(z[i], t.beta);
  }
  double total = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      const double zeta[2] = {z[i], z[k]};
      double q2[2];
      for (int j = 0; j < 2; ++j) q2[j] = oracle::sigmoid(t.c2[j] + t.V[j * 2] * zeta[0] + t.V[j * 2 + 1] * zeta[1]);
      for (int s1 = 0; s1 < 4; ++s1) {
        const double z1[2] = {double(s1 & 1), double(s1 >> 1)};
        const double wq = (z1[0] ? q1[0] * r1[i] : (1 - q1[0]) * r0[i]) * (z1[1] ? q1[1] * r1[k] : (1 - q1[1]) * r0[k]);
        const double log_q1 = std::log(z1[0] ? q1[0] : 1 - q1[0]) + std::log(z1[1] ? q1[1] : 1 - q1[1]);
        double inner = 0;
        for (int s2 = 0; s2 < 4; ++s2) {
          const double z2[2] = {double(s2 & 1), double(s2 >> 1)};
          const double p2 = (z2[0] ? q2[0] : 1 - q2[0]) * (z2[1] ? q2[1] : 1 - q2[1]);
          inner += p2 * (log_q1 + std::log(p2) + rbm_toy_energy(t, z1, z2) + log_z);
        }
        total += wq * inner;
      }
    }
  }
  return total;
}

inline odvae::rbm::RbmParams rbm_toy_params(const RbmToy& t) {
  return {odvae::Tensor::vector(t.a1), odvae::Tensor::vector(t.a2), odvae::Tensor::matrix(2, 2, t.W)};
}

// Per-row single-sample rbm_kl estimates for B draws of zeta1.
inline odvae::Tensor rbm_kl_samples(const RbmToy& t, std::size_t B, std::uint64_t seed,
                                    odvae::bounds::CrossTerm cross = odvae::bounds::CrossTerm::Nu) {
  using odvae::Tensor;
  odvae::Rng rng(seed);
  const odvae::smoothing::SmoothingKind kind = odvae::smoothing::ExpMixture{t.beta};
  std::vector<double> g1v;
  for (std::size_t r = 0; r < B; ++r) g1v.insert(g1v.end(), t.c1.begin(), t.c1.end());
  const Tensor g1({B, 2}, g1v);
  const Tensor zeta1 = odvae::smoothing::sample(kind, g1, uniform_noise(B, 2, rng));
  // g2 = c2 + zeta1 V', with V' laid out as the affine weight.
  const Tensor vt = Tensor::matrix(2, 2, {t.V[0], t.V[2], t.V[1], t.V[3]});
  const Tensor g2 = odvae::affine(zeta1, vt, Tensor::vector(t.c2));
  const auto prior = rbm_toy_params(t);
  return odvae::bounds::rbm_kl(g1, zeta1, g2, prior, kind, Tensor::scalar(odvae::rbm::exact_log_z(prior)), cross);
}

inline std::vector<double> values(const odvae::Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace toy
